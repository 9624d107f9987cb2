"""
Bessel and Hankel functions of integer order zero and one for real arguments.

Thin validated wrappers around the Cephes routines in scipy.special, which
use ascending rational approximations for small arguments and the Hankel
asymptotic expansion with rational corrections for large ones. Scalars in,
scalars out; arrays are evaluated elementwise.
"""

from typing import Union

import numpy as np
import numpy.typing as npt
from scipy import special

from kerrsight.core.errors import DomainError

RealArg = Union[float, npt.ArrayLike]


def _check_domain(x: RealArg, allow_zero: bool, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name}: argument must be finite")
    if allow_zero:
        if np.any(arr < 0):
            raise DomainError(f"{name}: argument must be >= 0, got min {arr.min()}")
    elif np.any(arr <= 0):
        raise DomainError(f"{name}: argument must be > 0 (logarithmic singularity at 0)")
    return arr


def _unwrap(value: np.ndarray, x: RealArg):
    return value.item() if np.ndim(x) == 0 else value


def bessel_j0(x: RealArg):
    """J0(x) for x >= 0."""
    arr = _check_domain(x, allow_zero=True, name="bessel_j0")
    return _unwrap(special.j0(arr), x)


def bessel_j1(x: RealArg):
    """J1(x) for x >= 0."""
    arr = _check_domain(x, allow_zero=True, name="bessel_j1")
    return _unwrap(special.j1(arr), x)


def bessel_y0(x: RealArg):
    """Y0(x) for x > 0."""
    arr = _check_domain(x, allow_zero=False, name="bessel_y0")
    return _unwrap(special.y0(arr), x)


def bessel_y1(x: RealArg):
    """Y1(x) for x > 0."""
    arr = _check_domain(x, allow_zero=False, name="bessel_y1")
    return _unwrap(special.y1(arr), x)


def hankel1_0(x: RealArg):
    """H0^(1)(x) = J0(x) + i Y0(x) for x > 0."""
    arr = _check_domain(x, allow_zero=False, name="hankel1_0")
    return _unwrap(special.j0(arr) + 1j * special.y0(arr), x)

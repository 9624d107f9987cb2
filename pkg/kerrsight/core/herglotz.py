"""
Fourier-mode densities on the unit circle, the Herglotz operator H and its
adjoint H*.

All of them share one equidistant angular quadrature so that
<Hg, phi>_{L2(D)} = <g, H* phi>_{L2(S1)} holds for the discrete operators.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from kerrsight.core.errors import AliasingError, DimensionMismatchError, InvalidParameterError
from kerrsight.core.geometry import Grid2D, SupportMask

SQRT_2PI = np.sqrt(2 * np.pi)


@dataclass(frozen=True)
class AngularQuadrature:
    """Trapezoid rule on phi_m = 2 pi m / M"""
    M: int

    def __post_init__(self):
        if self.M < 2:
            raise InvalidParameterError(f"quadrature needs M >= 2 nodes, got {self.M}")

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M

    @property
    def weight(self) -> float:
        return 2 * np.pi / self.M

    @property
    def directions(self) -> np.ndarray:
        """(M, 2) array of unit vectors (cos phi_m, sin phi_m)"""
        phi = self.angles
        return np.column_stack([np.cos(phi), np.sin(phi)])

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """<a, b>_{L2(S1)} = (2 pi / M) sum a conj(b)"""
        return complex(self.weight * np.vdot(b, a))

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(self.weight) * np.linalg.norm(a))


@dataclass(frozen=True, eq=False)
class Density:
    """Coefficients g_n, n = -N/2 .. N/2-1, of g(t) = sum g_n e^{int} / sqrt(2 pi)"""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=np.complex128).ravel()
        if coeffs.size < 2 or coeffs.size % 2:
            raise InvalidParameterError(f"density needs an even number N >= 2 of modes, got {coeffs.size}")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def N(self) -> int:
        return self.coeffs.size

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.N // 2, self.N // 2)

    @property
    def norm(self) -> float:
        """L2(S1) norm, by Parseval"""
        return float(np.linalg.norm(self.coeffs))

    def scaled(self, factor: complex) -> "Density":
        return Density(self.coeffs * factor)

    def normalized(self, radius: float) -> "Density":
        return Density(self.coeffs * (radius / self.norm))

    def to_real(self) -> np.ndarray:
        return np.concatenate([self.coeffs.real, self.coeffs.imag])

    @classmethod
    def from_real(cls, x: np.ndarray) -> "Density":
        half = x.size // 2
        return cls(x[:half] + 1j * x[half:])

    @classmethod
    def zeros(cls, N: int) -> "Density":
        return cls(np.zeros(N, dtype=np.complex128))

    @classmethod
    def mode(cls, N: int, n: int, value: complex = 1.0) -> "Density":
        coeffs = np.zeros(N, dtype=np.complex128)
        coeffs[n + N // 2] = value
        return cls(coeffs)

    @classmethod
    def random(cls, rng: np.random.Generator, N: int, norm: float = 1.0) -> "Density":
        coeffs = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        return cls(coeffs).normalized(norm)

    @classmethod
    def project(cls, values: np.ndarray, quad: AngularQuadrature, N: int) -> "Density":
        """Least-squares projection of nodal values onto N Fourier modes"""
        basis = mode_matrix(quad, N)
        return cls(quad.weight * basis.conj().T @ np.asarray(values, dtype=np.complex128))


def mode_matrix(quad: AngularQuadrature, N: int) -> np.ndarray:
    """E[m, n] = e^{i n phi_m} / sqrt(2 pi), n = -N/2 .. N/2-1"""
    if quad.M < 2 * N:
        raise AliasingError(f"M = {quad.M} nodes cannot resolve N = {N} modes without aliasing (need M >= 2N)")
    modes = np.arange(-N // 2, N // 2)
    return np.exp(1j * np.outer(quad.angles, modes)) / SQRT_2PI


def evaluate_density(g: Density, quad: AngularQuadrature) -> np.ndarray:
    """Nodal values g(phi_m)."""
    return mode_matrix(quad, g.N) @ g.coeffs


def plane_wave_matrix(points: np.ndarray, k: float, quad: AngularQuadrature) -> np.ndarray:
    """P[p, m] = exp(i k x_p . theta_m)"""
    return np.exp(1j * k * (points @ quad.directions.T))


class PlaneWaveBasis:
    """Cached plane-wave matrix for a fixed grid, wavenumber and quadrature"""

    def __init__(self, grid: Grid2D, k: float, quad: AngularQuadrature):
        self.grid = grid
        self.k = k
        self.quad = quad
        self.matrix = plane_wave_matrix(grid.points(), k, quad)

    def herglotz(self, nodes: np.ndarray) -> np.ndarray:
        return (self.matrix @ (self.quad.weight * nodes)).reshape(self.grid.shape)

    def adjoint(self, phi: np.ndarray, mask: SupportMask) -> np.ndarray:
        flat_mask = mask.ravel()
        values = phi.ravel()[flat_mask]
        return self.grid.h ** 2 * (self.matrix[flat_mask].conj().T @ values)


def herglotz(g: Density,
             grid: Grid2D,
             k: float,
             quad: AngularQuadrature,
             basis: Optional[PlaneWaveBasis] = None) -> np.ndarray:
    """(Hg)(x) = sum_m (2 pi / M) g(phi_m) exp(i k x . theta_m) on the grid."""
    nodes = evaluate_density(g, quad)
    if basis is None:
        basis = PlaneWaveBasis(grid, k, quad)
    return basis.herglotz(nodes)


def herglotz_adjoint(phi: np.ndarray,
                     mask: SupportMask,
                     grid: Grid2D,
                     k: float,
                     quad: AngularQuadrature,
                     basis: Optional[PlaneWaveBasis] = None) -> np.ndarray:
    """(H* phi)(x_m) = h^2 sum_{y in mask} phi(y) exp(-i k x_m . y) at the nodes."""
    phi = grid.check_field(phi, "phi")
    if np.asarray(mask).shape != grid.shape:
        raise DimensionMismatchError(f"mask has shape {np.asarray(mask).shape}, grid expects {grid.shape}")
    mask = np.asarray(mask, dtype=bool)
    if basis is not None:
        return basis.adjoint(phi, mask)
    points = grid.points()[mask.ravel()]
    return grid.h ** 2 * (plane_wave_matrix(points, k, quad).conj().T @ phi[mask])

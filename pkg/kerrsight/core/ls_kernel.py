"""
Volume potential f -> k^2 (Phi_k * f) on a Grid2D and the Krylov solve of
(I - k^2 Phi_k * (q0 .)) x = rhs.

The potential is discretized by a cell-centred cubature: off the diagonal the
kernel is sampled, on the diagonal the log-singular real part of Phi_k is
replaced by its average over the cell. The discrete convolution is evaluated
exactly by FFT on a zero-padded domain of at least 2(2J+1) - 1 points per axis.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import fft
from scipy.sparse.linalg import LinearOperator, gmres

from kerrsight.core.errors import InvalidParameterError, NoConvergenceError
from kerrsight.core.geometry import Grid2D
from kerrsight.core.special_functions import bessel_y0, hankel1_0
from kerrsight.core.tracer import RunTracer, StepType

log = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
CELL_GAUSS_ORDER = 10


@dataclass(frozen=True)
class LinearSolveConfig:
    krylov_tolerance: float = 1e-10
    max_iterations: int = 2000
    restart: int = 50

    def __post_init__(self):
        if not 0 < self.krylov_tolerance < 1:
            raise InvalidParameterError(f"krylov_tolerance must lie in (0, 1), got {self.krylov_tolerance}")
        if self.max_iterations < 1:
            raise InvalidParameterError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.restart < 1:
            raise InvalidParameterError(f"restart must be >= 1, got {self.restart}")


def fundamental_solution(r, k: float):
    """Phi_k(r) = (i/4) H0^(1)(k r), r > 0."""
    return 0.25j * hankel1_0(k * np.asarray(r, dtype=float))


def cell_average(h: float, k: float) -> complex:
    """
    Average of Phi_k over the square cell [-h/2, h/2]^2.

    Re Phi_k = -Y0(kr)/4 = -(1/2pi) log r + smooth; the log part is averaged in
    closed form, the continuous remainder by tensor Gauss-Legendre. Im Phi_k is
    smooth and taken at the cell centre (J0(0)/4).
    """
    a = h / 2.0
    mean_log = math.log(a) + 0.5 * math.log(2.0) + math.pi / 4.0 - 1.5
    nodes, weights = np.polynomial.legendre.leggauss(CELL_GAUSS_ORDER)
    x = a * nodes
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(weights, weights) / 4.0
    r = np.hypot(X, Y)
    remainder = -0.25 * bessel_y0(k * r) + np.log(r) / (2.0 * math.pi)
    mean_real = -mean_log / (2.0 * math.pi) + float(np.sum(W * remainder))
    return complex(mean_real, 0.25)


class ConvolutionKernel:
    """Fourier multipliers of the zero-padded discrete kernel k^2 h^2 Phi_k"""

    def __init__(self, grid: Grid2D, k: float):
        if not (np.isfinite(k) and k > 0):
            raise InvalidParameterError(f"wavenumber k must be > 0, got {k}")
        self.grid = grid
        self.k = float(k)
        n = grid.n
        self.fft_size = fft.next_fast_len(2 * n - 1, real=True)

        lags = np.arange(-(n - 1), n)
        A, B = np.meshgrid(lags, lags, indexing="ij")
        r = grid.h * np.hypot(A, B)
        centre = (n - 1, n - 1)
        r[centre] = 1.0  # placeholder, overwritten below
        values = fundamental_solution(r, self.k)
        values[centre] = cell_average(grid.h, self.k)
        values *= self.k ** 2 * grid.h ** 2
        values.setflags(write=False)
        self.lag_values = values

        embedded = np.zeros((self.fft_size, self.fft_size), dtype=np.complex128)
        idx = lags % self.fft_size
        embedded[np.ix_(idx, idx)] = values
        multipliers = fft.fft2(embedded)
        multipliers.setflags(write=False)
        self.multipliers = multipliers
        log.debug("kernel built: k=%g, h=%g, grid %dx%d, fft size %d", self.k, grid.h, n, n, self.fft_size)

    def lag_value(self, a: int, b: int) -> complex:
        """Discrete kernel weight between points whose indices differ by (a, b)"""
        n = self.grid.n
        return complex(self.lag_values[a + n - 1, b + n - 1])

    def apply(self, f: np.ndarray) -> np.ndarray:
        f = self.grid.check_field(f, "density")
        n, L = self.grid.n, self.fft_size
        padded = np.zeros((L, L), dtype=np.complex128)
        padded[:n, :n] = f
        return fft.ifft2(fft.fft2(padded) * self.multipliers)[:n, :n]


def build_kernel(grid: Grid2D, k: float) -> ConvolutionKernel:
    """Precompute the convolution kernel for wavenumber k on grid."""
    return ConvolutionKernel(grid, k)


def apply_potential(kernel: ConvolutionKernel, f: np.ndarray) -> np.ndarray:
    """Grid samples of k^2 (Phi_k * f)."""
    return kernel.apply(f)


def solve_linearized(kernel: ConvolutionKernel,
                     q0: np.ndarray,
                     rhs: np.ndarray,
                     cfg: LinearSolveConfig = LinearSolveConfig(),
                     tracer: Optional[RunTracer] = None) -> np.ndarray:
    """Solve x - k^2 Phi_k * (q0 x) = rhs by restarted GMRES."""
    start = time.time()
    grid = kernel.grid
    q0 = grid.check_field(q0, "q0").astype(float)
    rhs = grid.check_field(rhs, "rhs").astype(np.complex128)
    if not np.all(np.isfinite(rhs)):
        raise NoConvergenceError("right-hand side is not finite")
    if not np.any(q0):
        return rhs.copy()
    b = rhs.ravel()
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return np.zeros_like(rhs)

    def matvec(x):
        x = x.reshape(grid.shape)
        return (x - kernel.apply(q0 * x)).ravel()

    operator = LinearOperator((b.size, b.size), matvec=matvec, dtype=np.complex128)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    max_cycles = max(1, math.ceil(cfg.max_iterations / cfg.restart))
    x, info = gmres(operator, b, rtol=cfg.krylov_tolerance, atol=0.0,
                    restart=cfg.restart, maxiter=max_cycles,
                    callback=count, callback_type="pr_norm")
    residual = np.linalg.norm(matvec(x) - b) / b_norm
    if info == 0 and residual > cfg.krylov_tolerance:
        # GMRES stops on its own residual estimate; polish once from x
        x, info = gmres(operator, b, x0=x, rtol=cfg.krylov_tolerance, atol=0.0,
                        restart=cfg.restart, maxiter=max_cycles,
                        callback=count, callback_type="pr_norm")
        residual = np.linalg.norm(matvec(x) - b) / b_norm
    log.debug("gmres: %d iterations, relative residual %.3e", iterations, residual)
    converged = info == 0 and residual <= cfg.krylov_tolerance
    if tracer is not None:
        tracer.log_step(
            StepType.LINEAR_SOLVE,
            output_data={"iterations": iterations, "residual": float(residual), "converged": converged},
            duration_ms=(time.time() - start) * 1000,
        )
    if not converged:
        raise NoConvergenceError(
            f"GMRES did not reach relative residual {cfg.krylov_tolerance:g} within "
            f"{cfg.max_iterations} iterations (residual {residual:.3e}); "
            "the wavenumber may be near a resonance or the grid too coarse",
            residual=residual,
        )
    return x.reshape(grid.shape)

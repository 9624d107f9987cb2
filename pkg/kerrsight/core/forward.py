"""
Nonlinear forward scattering for generalized Kerr media.

The scattered field is split as u^s = u0s + w, where u0s solves the linear
Lippmann-Schwinger equation with contrast q0 and w is the fixed point of

    G(w) = (I - k^2 Phi_k * (q0 .))^{-1} k^2 Phi_k * (q_N(|u|) u),
    u = u^i + u0s + w,  q_N = q - q0,

iterated from w_0 = 0.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from kerrsight.core.errors import InvariantViolationError, NoContractionError
from kerrsight.core.geometry import Grid2D, SupportMask
from kerrsight.core.herglotz import AngularQuadrature, PlaneWaveBasis, herglotz_adjoint
from kerrsight.core.ls_kernel import (
    ConvolutionKernel,
    LinearSolveConfig,
    fundamental_solution,
    solve_linearized,
)
from kerrsight.core.tracer import RunTracer, StepType

log = logging.getLogger(__name__)

DIVERGENCE_WINDOW = 5
ZERO_NORM = 1e-300


@dataclass(frozen=True, eq=False)
class ContrastTerm:
    coefficient: np.ndarray
    exponent: float


@dataclass(frozen=True, eq=False)
class Contrast:
    """q(x, |z|) = sum_l q_l(x) |z|^alpha_l with alpha_0 = 0, supported in D"""
    terms: Tuple[ContrastTerm, ...]
    support: SupportMask

    def __post_init__(self):
        terms = tuple(self.terms)
        support = np.asarray(self.support, dtype=bool)
        if not terms:
            raise InvariantViolationError("contrast needs at least the linear term q0")
        if terms[0].exponent != 0:
            raise InvariantViolationError(f"first contrast term must have exponent 0, got {terms[0].exponent}")
        exponents = [t.exponent for t in terms]
        if any(b <= a for a, b in zip(exponents, exponents[1:])):
            raise InvariantViolationError(f"contrast exponents must be strictly increasing, got {exponents}")
        for t in terms:
            coeff = np.asarray(t.coefficient, dtype=float)
            if coeff.shape != support.shape:
                raise InvariantViolationError(
                    f"coefficient shape {coeff.shape} does not match support shape {support.shape}"
                )
            if np.any(coeff[~support] != 0):
                raise InvariantViolationError("contrast coefficients must vanish outside the support D")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "support", support)

    @classmethod
    def from_terms(cls,
                   terms: Sequence[Tuple[Union[float, np.ndarray], float]],
                   support: SupportMask) -> "Contrast":
        """Constant or field coefficients, each restricted to the support"""
        support = np.asarray(support, dtype=bool)
        built = []
        for value, exponent in terms:
            coeff = np.where(support, np.broadcast_to(np.asarray(value, dtype=float), support.shape), 0.0)
            built.append(ContrastTerm(coeff, float(exponent)))
        return cls(tuple(built), support)

    @property
    def q0(self) -> np.ndarray:
        return self.terms[0].coefficient

    @property
    def nonlinear_terms(self) -> Tuple[ContrastTerm, ...]:
        return self.terms[1:]

    @property
    def is_linear(self) -> bool:
        return all(not np.any(t.coefficient) for t in self.nonlinear_terms)

    @property
    def alpha(self) -> Optional[float]:
        return self.terms[1].exponent if len(self.terms) > 1 else None

    def q0_min(self) -> float:
        return float(self.q0[self.support].min()) if self.support.any() else 0.0

    def value(self, abs_u: np.ndarray) -> np.ndarray:
        """q(x, |u(x)|)"""
        out = np.array(self.q0, dtype=float)
        for t in self.nonlinear_terms:
            out = out + t.coefficient * abs_u ** t.exponent
        return out

    def nonlinear_source(self, u: np.ndarray) -> np.ndarray:
        """q_N(x, |u|) u, zero outside D"""
        abs_u = np.abs(u)
        out = np.zeros_like(u, dtype=np.complex128)
        with np.errstate(over="ignore", invalid="ignore"):
            for t in self.nonlinear_terms:
                out += t.coefficient * abs_u ** t.exponent * u
        return np.where(self.support, out, 0.0)

    def linear(self) -> "Contrast":
        return Contrast((self.terms[0],), self.support)

    def rescaled(self, tau: float) -> "Contrast":
        """Coefficients for fields measured in units of tau: q_l -> tau^alpha_l q_l"""
        return Contrast(
            tuple(ContrastTerm(t.coefficient * tau ** t.exponent, t.exponent) for t in self.terms),
            self.support,
        )


@dataclass(frozen=True)
class FixedPointConfig:
    tolerance: float = 1e-5
    max_sweeps: int = 100

    def __post_init__(self):
        if not 0 < self.tolerance < 1:
            raise InvariantViolationError(f"fixed point tolerance must lie in (0, 1), got {self.tolerance}")
        if self.max_sweeps < 1:
            raise InvariantViolationError(f"max_sweeps must be >= 1, got {self.max_sweeps}")


@dataclass(eq=False)
class ForwardResult:
    u0s: np.ndarray
    w: np.ndarray
    iterations_used: int
    increment_history: List[float] = field(default_factory=list)

    @property
    def scattered(self) -> np.ndarray:
        return self.u0s + self.w

    def total(self, ui: np.ndarray) -> np.ndarray:
        return ui + self.u0s + self.w


@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128).ravel()
        if samples.size < 2:
            raise InvariantViolationError("far field pattern needs M >= 2 samples")
        object.__setattr__(self, "samples", samples)

    @property
    def M(self) -> int:
        return self.samples.size

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M


@dataclass(frozen=True)
class ContrastDiagnostics:
    essinf_one_plus_q0: float
    c_q: float
    alpha: Optional[float]
    exponents: Tuple[float, ...]
    coefficient_bound: float

    def to_dict(self):
        return {
            "essinf_one_plus_q0": self.essinf_one_plus_q0,
            "c_q": self.c_q,
            "alpha": self.alpha,
            "exponents": list(self.exponents),
            "coefficient_bound": self.coefficient_bound,
        }


def sample_pairs(samples: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Complex pairs uniform in the closed unit disk"""
    radius = np.sqrt(rng.uniform(0.0, 1.0, size=(2, samples)))
    phase = rng.uniform(0.0, 2 * np.pi, size=(2, samples))
    z = radius * np.exp(1j * phase)
    return z[0], z[1]


def empirical_cq(q: Contrast, samples: int = 10_000, seed: int = 0) -> float:
    """
    Largest observed ratio

        |q(x,|z1|) z1 - q(x,|z2|) z2 - q0 (z1 - z2)| / ((|z1|^a + |z2|^a) |z1 - z2|)

    over x in D and random |z1|, |z2| <= 1, with a = alpha_1.
    """
    if q.is_linear or not q.support.any():
        return 0.0
    alpha = q.alpha
    z1, z2 = sample_pairs(samples, np.random.default_rng(seed))
    denominator = (np.abs(z1) ** alpha + np.abs(z2) ** alpha) * np.abs(z1 - z2)
    keep = denominator > 0
    z1, z2, denominator = z1[keep], z2[keep], denominator[keep]
    # distinct coefficient vectors over D
    stacked = np.stack([t.coefficient[q.support] for t in q.nonlinear_terms], axis=1)
    rows = np.unique(stacked, axis=0)
    worst = 0.0
    for row in rows:
        numerator = np.zeros_like(z1)
        for coeff, t in zip(row, q.nonlinear_terms):
            numerator += coeff * (np.abs(z1) ** t.exponent * z1 - np.abs(z2) ** t.exponent * z2)
        worst = max(worst, float(np.max(np.abs(numerator) / denominator)))
    return worst


def validate_contrast(q: Contrast, samples: int = 10_000, seed: int = 0) -> ContrastDiagnostics:
    """Check essinf(1 + q0) > 0 and measure the Lipschitz-type constant C_q."""
    one_plus_q0 = 1.0 + q.q0
    essinf = float(one_plus_q0[q.support].min()) if q.support.any() else 1.0
    if essinf <= 0:
        raise InvariantViolationError(f"essinf(1 + q0) = {essinf:g} must be > 0")
    bound = float(sum(np.abs(t.coefficient).max() for t in q.nonlinear_terms))
    return ContrastDiagnostics(
        essinf_one_plus_q0=essinf,
        c_q=empirical_cq(q, samples=samples, seed=seed),
        alpha=q.alpha,
        exponents=tuple(t.exponent for t in q.terms),
        coefficient_bound=bound,
    )


def plane_wave(grid: Grid2D, k: float, angle: float, amplitude: complex = 1.0) -> np.ndarray:
    """amplitude * exp(i k x . (cos angle, sin angle)) on the grid"""
    X, Y = grid.mesh()
    return amplitude * np.exp(1j * k * (X * np.cos(angle) + Y * np.sin(angle)))


def solve_linear(kernel: ConvolutionKernel,
                 q: Contrast,
                 ui: np.ndarray,
                 cfg: LinearSolveConfig = LinearSolveConfig(),
                 tracer: Optional[RunTracer] = None) -> np.ndarray:
    """u0s = (I - k^2 Phi_k * (q0 .))^{-1} k^2 Phi_k * (q0 ui)."""
    ui = kernel.grid.check_field(ui, "incident field")
    if not np.any(q.q0):
        return np.zeros(kernel.grid.shape, dtype=np.complex128)
    rhs = kernel.apply(q.q0 * ui)
    return solve_linearized(kernel, q.q0, rhs, cfg, tracer)


def fixed_point_map(kernel: ConvolutionKernel,
                    q: Contrast,
                    ui: np.ndarray,
                    u0s: np.ndarray,
                    w: np.ndarray,
                    lin: LinearSolveConfig = LinearSolveConfig(),
                    tracer: Optional[RunTracer] = None) -> np.ndarray:
    """G(w) for the nonlinear correction"""
    source = q.nonlinear_source(ui + u0s + w)
    if not np.all(np.isfinite(source)):
        raise NoContractionError("nonlinear source overflowed")
    if not np.any(source):
        return np.zeros(kernel.grid.shape, dtype=np.complex128)
    with np.errstate(over="ignore", invalid="ignore"):
        rhs = kernel.apply(source)
    if not np.all(np.isfinite(rhs)):
        raise NoContractionError("volume potential of the nonlinear source overflowed")
    return solve_linearized(kernel, q.q0, rhs, lin, tracer)


def _stalled(history: List[float]) -> bool:
    if len(history) <= DIVERGENCE_WINDOW:
        return False
    window = history[-(DIVERGENCE_WINDOW + 1):]
    return all(b >= a for a, b in zip(window, window[1:]))


def solve_nonlinear(kernel: ConvolutionKernel,
                    q: Contrast,
                    ui: np.ndarray,
                    fp: FixedPointConfig = FixedPointConfig(),
                    lin: LinearSolveConfig = LinearSolveConfig(),
                    tracer: Optional[RunTracer] = None) -> ForwardResult:
    """Linear solve for u0s followed by the fixed point iteration for w."""
    start = time.time()
    u0s = solve_linear(kernel, q, ui, lin, tracer)
    w = np.zeros(kernel.grid.shape, dtype=np.complex128)
    history: List[float] = []

    for sweep in range(1, fp.max_sweeps + 1):
        try:
            w_next = fixed_point_map(kernel, q, ui, u0s, w, lin, tracer)
        except NoContractionError as exc:
            raise NoContractionError(f"{exc} at sweep {sweep}", history) from exc
        if not np.all(np.isfinite(w_next)):
            raise NoContractionError(f"iterate became non-finite at sweep {sweep}", history)
        next_norm = np.abs(w_next).max()
        if next_norm < ZERO_NORM:
            history.append(0.0)
            w = np.zeros_like(w_next)
            break
        increment = float(np.abs(w_next - w).max() / next_norm)
        history.append(increment)
        w = w_next
        log.debug("fixed point sweep %d: relative increment %.3e", sweep, increment)
        if tracer is not None:
            tracer.log_step(StepType.FIXED_POINT_SWEEP, output_data={"sweep": sweep, "increment": increment})
        if increment < fp.tolerance:
            break
        if _stalled(history):
            raise NoContractionError(
                f"fixed point increments stopped decreasing over {DIVERGENCE_WINDOW} sweeps "
                "(incident field too strong for the nonlinearity)",
                history,
            )
    else:
        raise NoContractionError(f"fixed point iteration hit max_sweeps = {fp.max_sweeps}", history)

    if tracer is not None:
        tracer.log_step(
            StepType.FORWARD_SOLVE,
            output_data={"iterations": len(history), "final_increment": history[-1]},
            duration_ms=(time.time() - start) * 1000,
        )
    return ForwardResult(u0s=u0s, w=w, iterations_used=len(history), increment_history=history)


def contrast_source(kernel: ConvolutionKernel, q: Contrast, u: np.ndarray) -> np.ndarray:
    """k^2 q(x, |u|) u, vanishing outside D"""
    return np.where(q.support, kernel.k ** 2 * q.value(np.abs(u)) * u, 0.0)


def far_field(kernel: ConvolutionKernel,
              q: Contrast,
              ui: np.ndarray,
              u0s: np.ndarray,
              w: np.ndarray,
              M: Union[int, AngularQuadrature],
              basis: Optional[PlaneWaveBasis] = None) -> FarFieldPattern:
    """u_inf(x_m) = k^2 h^2 sum_{y in D} q(y, |u|) u(y) exp(-i k x_m . y)."""
    grid = kernel.grid
    quad = M if isinstance(M, AngularQuadrature) else AngularQuadrature(int(M))
    u = grid.check_field(ui, "ui") + grid.check_field(u0s, "u0s") + grid.check_field(w, "w")
    source = contrast_source(kernel, q, u)
    return FarFieldPattern(herglotz_adjoint(source, q.support, grid, kernel.k, quad, basis=basis))


def far_field_at(angles: np.ndarray,
                kernel: ConvolutionKernel,
                q: Contrast,
                u: np.ndarray) -> np.ndarray:
    """u_inf at arbitrary observation angles for the total field u"""
    grid = kernel.grid
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    source = contrast_source(kernel, q, grid.check_field(u, "u"))[q.support]
    ys = grid.points()[q.support.ravel()]
    directions = np.column_stack([np.cos(angles), np.sin(angles)])
    return grid.h ** 2 * np.exp(-1j * kernel.k * directions @ ys.T) @ source


def scattered_field_at(points: np.ndarray,
                       kernel: ConvolutionKernel,
                       q: Contrast,
                       u: np.ndarray) -> np.ndarray:
    """u^s(x) = h^2 sum_{y in D} k^2 Phi_k(x - y) q(y, |u|) u(y) at points off the grid"""
    grid = kernel.grid
    source = contrast_source(kernel, q, u)[q.support]
    ys = grid.points()[q.support.ravel()]
    r = np.linalg.norm(np.asarray(points)[:, None, :] - ys[None, :, :], axis=-1)
    return grid.h ** 2 * fundamental_solution(r, kernel.k) @ source


def far_field_constant(k: float) -> complex:
    """C_2 = e^{i pi/4} / sqrt(8 pi k)"""
    return np.exp(1j * np.pi / 4) / np.sqrt(8 * np.pi * k)

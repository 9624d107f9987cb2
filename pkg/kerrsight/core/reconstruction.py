"""
Support reconstruction from the nonlinear far field operator.

Two indicators are evaluated per sampling point z:

    factorization:  inf_{||g|| = rho} |<F(g), g> / <g, phi_z>^2|
    monotonicity:   inf_{||g|| = rho} Re<F(g), g> / |<phi_z, g>|^2

with phi_z(x) = exp(-i k z . x). Both infima are approximated by a global
search over shifted Herglotz densities followed by projected gradient descent
on the sphere ||g|| = rho in the 2N real Fourier coefficients.
"""

import logging
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from kerrsight.core.errors import (
    AllDegenerateError,
    DegenerateDenominatorError,
    InvalidParameterError,
    KerrsightError,
)
from kerrsight.core.geometry import Grid2D, Shape, SupportMask, rasterize
from kerrsight.core.herglotz import SQRT_2PI, AngularQuadrature, Density, evaluate_density, mode_matrix
from kerrsight.core.scene import Scene, far_field_operator, middle_operator
from kerrsight.core.tracer import RunTracer, StepType

log = logging.getLogger(__name__)

STATUS_OK = "ok"


class ObjectiveKind(str, Enum):
    FACTORIZATION = "factorization"
    MONOTONICITY = "monotonicity"


class ShiftSet(str, Enum):
    GRID = "grid"
    SELF = "self"


@dataclass(frozen=True, eq=False)
class TestFunction:
    """phi_z at the quadrature nodes and its Fourier coefficients"""
    z: Tuple[float, float]
    values: np.ndarray
    coeffs: np.ndarray

    __test__ = False


def test_function(z: Sequence[float], k: float, quad: AngularQuadrature, N: int) -> TestFunction:
    z = (float(z[0]), float(z[1]))
    values = np.exp(-1j * k * (quad.directions @ np.asarray(z)))
    coeffs = quad.weight * (mode_matrix(quad, N).conj().T @ values)
    return TestFunction(z, values, coeffs)


test_function.__test__ = False


@dataclass(frozen=True)
class OptimizerConfig:
    rho: float
    fd_step: Optional[float] = None
    max_evals: int = 400
    step_shrink: float = 0.5
    stall_tolerance: float = 1e-4
    stall_window: int = 10
    gradient_tolerance: float = 1e-8
    armijo: float = 1e-4
    initial_step: float = 0.1
    denominator_floor: Optional[float] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidParameterError(f"rho must be > 0, got {self.rho}")
        if self.fd_step is None:
            object.__setattr__(self, "fd_step", 1e-4 * self.rho)
        if self.denominator_floor is None:
            object.__setattr__(self, "denominator_floor", 1e-10 * self.rho * SQRT_2PI)
        for name in ("fd_step", "max_evals", "step_shrink", "stall_tolerance", "stall_window",
                     "gradient_tolerance", "armijo", "initial_step", "denominator_floor"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"optimizer {name} must be > 0, got {getattr(self, name)}")
        if not self.step_shrink < 1:
            raise InvalidParameterError(f"step_shrink must be < 1, got {self.step_shrink}")
        if not self.fd_step < self.rho:
            raise InvalidParameterError(f"fd_step {self.fd_step} must be much smaller than rho {self.rho}")


def _denominator(g: Density, phi: TestFunction) -> complex:
    # <g, phi_z> through Parseval on the shared modes
    return complex(np.vdot(phi.coeffs, g.coeffs))


def _quotient(kind: ObjectiveKind, numerator: complex, denominator: complex) -> float:
    if kind is ObjectiveKind.FACTORIZATION:
        return float(abs(numerator / denominator ** 2))
    return float(numerator.real / abs(denominator) ** 2)


def numerator(g: Density, scene: Scene, tracer: Optional[RunTracer] = None) -> complex:
    """<F(g), g> in L2(S1) with the trapezoid rule"""
    pattern = far_field_operator(g, scene, tracer=tracer)
    return scene.quadrature.inner(pattern.samples, evaluate_density(g, scene.quadrature))


def objective(kind: ObjectiveKind,
              g: Density,
              z: Union[Sequence[float], TestFunction],
              scene: Scene,
              floor: Optional[float] = None) -> float:
    """Factorization or monotonicity quotient for one density and sampling point."""
    kind = ObjectiveKind(kind)
    phi = z if isinstance(z, TestFunction) else test_function(z, scene.k, scene.quadrature, g.N)
    if floor is None:
        floor = OptimizerConfig(rho=scene.rho).denominator_floor
    denominator = _denominator(g, phi)
    if abs(denominator) < floor:
        raise DegenerateDenominatorError(
            f"|<g, phi_z>| = {abs(denominator):.3e} below floor {floor:.3e} at z = {phi.z}"
        )
    return _quotient(kind, numerator(g, scene), denominator)


class ObjectiveCounter:
    """Objective at a fixed z that counts far field evaluations"""

    def __init__(self, kind: ObjectiveKind, phi: TestFunction, scene: Scene, floor: float):
        self.kind = kind
        self.phi = phi
        self.scene = scene
        self.floor = floor
        self.evals = 0

    def __call__(self, x: np.ndarray) -> float:
        g = Density.from_real(x)
        denominator = _denominator(g, self.phi)
        if abs(denominator) < self.floor:
            raise DegenerateDenominatorError(f"|<g, phi_z>| = {abs(denominator):.3e} below floor")
        self.evals += 1
        return _quotient(self.kind, numerator(g, self.scene), denominator)


def shift_points(sampling: Grid2D, stride: int = 1) -> np.ndarray:
    """Sampling points whose indices are multiples of stride, in grid order"""
    if stride < 1:
        raise InvalidParameterError(f"shift stride must be >= 1, got {stride}")
    keep = sampling.indices % stride == 0
    axis = sampling.axis[keep]
    X, Y = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def candidate_density(mode: int, shift: Sequence[float], scene: Scene, phase: int = 0) -> Density:
    """
    Projection onto N modes of

        rho i^p e^{i l t} e^{-i k (z'_1 cos t + z'_2 sin t)} / sqrt(2 pi),

    renormalized to ||g|| = rho.
    """
    quad = scene.quadrature
    values = (1j ** phase) * np.exp(1j * mode * quad.angles) / SQRT_2PI
    values = values * np.exp(-1j * scene.k * (quad.directions @ np.asarray(shift, dtype=float)))
    g = Density.project(values, quad, scene.N)
    if g.norm == 0:
        return g
    return g.normalized(scene.rho)


@dataclass(eq=False)
class CandidateBank:
    """
    Phase-0 candidates with their z-independent numerators <F(g), g>.

    Phase p = 1 is derived from phase 0: F(i g) = i F(g) since the material
    law only sees |u|, so <F(ig), ig> = <F(g), g> and <ig, phi_z> = i <g, phi_z>.
    """
    modes: np.ndarray
    shifts: np.ndarray
    coeffs: np.ndarray        # (modes, shifts, N)
    numerators: np.ndarray    # (modes, shifts)

    @property
    def size(self) -> int:
        return 2 * self.numerators.size

    def density(self, phase: int, mode_index: int, shift_index: int) -> Density:
        return Density(self.coeffs[mode_index, shift_index] * (1j ** phase))


def build_candidate_bank(scene: Scene,
                         shifts: np.ndarray,
                         threads: int = 1,
                         tracer: Optional[RunTracer] = None) -> CandidateBank:
    """Evaluate F once per (mode, shift) candidate."""
    N = scene.N
    modes = np.arange(-N // 2, N // 2)
    shifts = np.atleast_2d(np.asarray(shifts, dtype=float))
    pairs = [(l, s) for l in range(len(modes)) for s in range(len(shifts))]
    densities = [candidate_density(int(modes[l]), shifts[s], scene) for l, s in pairs]

    def evaluate(g: Density) -> complex:
        return numerator(g, scene) if g.norm > 0 else 0j

    start = time.time()
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        values = list(pool.map(evaluate, densities))
    coeffs = np.stack([g.coeffs for g in densities]).reshape(len(modes), len(shifts), N)
    numerators = np.asarray(values, dtype=np.complex128).reshape(len(modes), len(shifts))
    log.info("candidate bank: %d forward solves for %d modes x %d shifts", len(pairs), len(modes), len(shifts))
    if tracer is not None:
        tracer.log_step(StepType.CANDIDATE_SEARCH,
                        input_data={"modes": len(modes), "shifts": len(shifts)},
                        output_data={"forward_solves": len(pairs)},
                        duration_ms=(time.time() - start) * 1000)
    return CandidateBank(modes, shifts, coeffs, numerators)


@dataclass(frozen=True, eq=False)
class SearchResult:
    density: Density
    value: float
    phase: int
    mode: int
    shift: Tuple[float, float]
    candidates: int


def search_bank(kind: ObjectiveKind, phi: TestFunction, bank: CandidateBank, floor: float) -> SearchResult:
    """Argmin over the bank; ties go to the first candidate in (p, l, z') order."""
    kind = ObjectiveKind(kind)
    denominators = bank.coeffs @ phi.coeffs.conj()
    degenerate = np.abs(denominators) < floor
    values = np.full((2,) + bank.numerators.shape, np.inf)
    for p in (0, 1):
        den = denominators * (1j ** p)
        with np.errstate(divide="ignore", invalid="ignore"):
            if kind is ObjectiveKind.FACTORIZATION:
                v = np.abs(bank.numerators / den ** 2)
            else:
                v = bank.numerators.real / np.abs(den) ** 2
        values[p] = np.where(degenerate, np.inf, v)
    if not np.isfinite(values).any():
        raise AllDegenerateError(f"every global-search candidate is degenerate at z = {phi.z}")
    p, l, s = np.unravel_index(int(np.argmin(values)), values.shape)
    return SearchResult(
        density=bank.density(int(p), int(l), int(s)),
        value=float(values[p, l, s]),
        phase=int(p),
        mode=int(bank.modes[l]),
        shift=(float(bank.shifts[s, 0]), float(bank.shifts[s, 1])),
        candidates=bank.size,
    )


def global_search_init(kind: ObjectiveKind,
                       z: Sequence[float],
                       scene: Scene,
                       shifts: Optional[np.ndarray] = None,
                       bank: Optional[CandidateBank] = None,
                       floor: Optional[float] = None) -> SearchResult:
    """
    Best candidate g_{p,l,z'} for sampling point z.

    Without a bank the candidates are built on the spot; shifts default to
    z itself.
    """
    if floor is None:
        floor = OptimizerConfig(rho=scene.rho).denominator_floor
    if bank is None:
        bank = build_candidate_bank(scene, np.asarray(z, dtype=float)[None, :] if shifts is None else shifts)
    phi = test_function(z, scene.k, scene.quadrature, scene.N)
    return search_bank(kind, phi, bank, floor)


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    density: Density
    value: float
    initial_value: float
    evals: int
    iterations: int
    reason: str
    history: Tuple[float, ...] = ()


def _tangent(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    return grad - (grad @ x) / (x @ x) * x


def _on_sphere(x: np.ndarray, rho: float) -> np.ndarray:
    return x * (rho / np.linalg.norm(x))


def _gradient(f: ObjectiveCounter, x: np.ndarray, delta: float, budget: int) -> Optional[np.ndarray]:
    """Central differences at unprojected points; None if the budget runs out"""
    grad = np.zeros_like(x)
    for i in range(x.size):
        if f.evals + 2 > budget:
            return None
        e = np.zeros_like(x)
        e[i] = delta
        try:
            grad[i] = (f(x + e) - f(x - e)) / (2 * delta)
        except DegenerateDenominatorError:
            grad[i] = 0.0
    return grad


def minimize_on_sphere(kind: ObjectiveKind,
                       z: Union[Sequence[float], TestFunction],
                       g0: Density,
                       scene: Scene,
                       cfg: OptimizerConfig,
                       counter: Optional[ObjectiveCounter] = None) -> OptimizationResult:
    """
    Projected gradient descent with Armijo backtracking on ||g|| = rho.

    A caller-supplied counter keeps the number of evaluations readable when
    a forward solve fails part way.
    """
    kind = ObjectiveKind(kind)
    phi = z if isinstance(z, TestFunction) else test_function(z, scene.k, scene.quadrature, g0.N)
    f = counter if counter is not None else ObjectiveCounter(kind, phi, scene, cfg.denominator_floor)
    x = _on_sphere(g0.to_real(), cfg.rho)
    value = f(x)
    initial = value
    history = [value]
    step = cfg.initial_step * cfg.rho
    iterations = 0
    reason = "budget"

    while f.evals < cfg.max_evals:
        grad = _gradient(f, x, cfg.fd_step, cfg.max_evals)
        if grad is None:
            break
        tangent = _tangent(grad, x)
        slope = float(np.linalg.norm(tangent))
        if slope < cfg.gradient_tolerance:
            reason = "stationary"
            break
        iterations += 1
        accepted = False
        while f.evals < cfg.max_evals and step > 1e-14 * cfg.rho:
            trial = _on_sphere(x - (step / slope) * tangent, cfg.rho)
            try:
                trial_value = f(trial)
            except DegenerateDenominatorError:
                step *= cfg.step_shrink
                continue
            if trial_value < value and trial_value <= value - cfg.armijo * step * slope:
                x, value = trial, trial_value
                history.append(value)
                accepted = True
                step = min(2 * step, cfg.rho)
                break
            step *= cfg.step_shrink
        if not accepted:
            reason = "budget" if f.evals >= cfg.max_evals else "no_descent"
            break
        window = cfg.stall_window
        if len(history) > window:
            reference = history[-window - 1]
            if reference - history[-1] <= cfg.stall_tolerance * abs(reference):
                reason = "stall"
                break

    best = Density.from_real(x).normalized(cfg.rho)
    log.debug("z=%s: %s -> %s after %d evals (%s)", phi.z, initial, value, f.evals, reason)
    return OptimizationResult(best, value, initial, f.evals, iterations, reason, tuple(history))


@dataclass(eq=False)
class IndicatorMap:
    """Initial and optimized indicator per sampling point, arrays indexed like grid fields"""
    kind: ObjectiveKind
    grid: Grid2D
    initial: np.ndarray
    values: np.ndarray
    evals: np.ndarray
    status: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == STATUS_OK

    def success_fraction(self) -> float:
        return float(self.ok.mean())

    def separation_ratio(self, shape: Shape, optimized: bool = True) -> float:
        return separation_ratio(self.values if optimized else self.initial, self.grid, shape)


def separation_ratio(values: np.ndarray, grid: Grid2D, shape: Shape) -> float:
    """
    median over interior points (signed distance <= -h/4) divided by the
    median over exterior points (distance to the boundary >= 1)
    """
    X, Y = grid.mesh()
    distance = shape.signed_distance(X, Y)
    finite = np.isfinite(values)
    interior = values[(distance <= -0.25 * grid.h) & finite]
    exterior = values[(distance >= 1.0) & finite]
    if interior.size == 0 or exterior.size == 0:
        raise InvalidParameterError("separation ratio needs interior and exterior sampling points")
    return float(np.median(interior) / np.median(exterior))


@dataclass(frozen=True)
class PointOutcome:
    initial: float
    value: float
    evals: int
    status: str


def _status_of(exc: KerrsightError) -> str:
    # NoContractionError -> no_contraction
    return re.sub(r"(?<!^)(?=[A-Z])", "_", type(exc).__name__).lower().removesuffix("_error")


def indicator_map(kind: ObjectiveKind,
                  sampling: Grid2D,
                  scene: Scene,
                  cfg: OptimizerConfig,
                  shifts: Union[ShiftSet, str] = ShiftSet.GRID,
                  shift_stride: int = 1,
                  threads: int = 1,
                  bank: Optional[CandidateBank] = None,
                  tracer: Optional[RunTracer] = None) -> IndicatorMap:
    """
    Evaluate the indicator at every sampling point.

    Points are processed independently on a thread pool and gathered by
    index, so the map does not depend on the thread count. A failing point
    gets NaN values and a status naming the error; the map is still returned.
    """
    kind = ObjectiveKind(kind)
    shifts = ShiftSet(shifts)
    if shifts is ShiftSet.GRID and bank is None:
        log.info("%s: building candidate bank (stride %d)", kind.value, shift_stride)
        bank = build_candidate_bank(scene, shift_points(sampling, shift_stride), threads=threads, tracer=tracer)
    points = sampling.points()

    def run_point(index: int) -> PointOutcome:
        z = points[index]
        start = time.time()
        phi = test_function(z, scene.k, scene.quadrature, scene.N)
        initial = np.nan
        counter = ObjectiveCounter(kind, phi, scene, cfg.denominator_floor)
        try:
            point_bank = bank if bank is not None else build_candidate_bank(scene, z[None, :])
            found = search_bank(kind, phi, point_bank, cfg.denominator_floor)
            initial = found.value
            result = minimize_on_sphere(kind, phi, found.density, scene, cfg, counter)
            outcome = PointOutcome(result.initial_value, result.value, result.evals, STATUS_OK)
        except KerrsightError as exc:
            log.warning("sampling point %s failed: %s", tuple(z), exc)
            outcome = PointOutcome(initial, np.nan, counter.evals, _status_of(exc))
        if tracer is not None:
            tracer.log_step(StepType.POINT_OPTIMIZATION,
                            input_data={"kind": kind.value, "index": index, "z": [float(z[0]), float(z[1])]},
                            output_data={"initial": outcome.initial, "value": outcome.value,
                                         "evals": outcome.evals, "status": outcome.status},
                            duration_ms=(time.time() - start) * 1000)
        return outcome

    log.info("%s: optimizing %d sampling points on %d threads", kind.value, len(points), threads)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes: List[PointOutcome] = list(pool.map(run_point, range(len(points))))

    shape = sampling.shape
    return IndicatorMap(
        kind=kind,
        grid=sampling,
        initial=np.array([o.initial for o in outcomes]).reshape(shape),
        values=np.array([o.value for o in outcomes]).reshape(shape),
        evals=np.array([o.evals for o in outcomes], dtype=int).reshape(shape),
        status=np.array([o.status for o in outcomes], dtype=object).reshape(shape),
    )


def probing_quadratic_form(B: Union[Shape, SupportMask, None], g: Density, scene: Scene) -> float:
    """<P_B g, g> = k^2 h^2 sum_{x in B} |(Hg)(x)|^2"""
    grid = scene.grid
    if B is None:
        return 0.0
    mask = rasterize(B, grid) if isinstance(B, Shape) else grid.check_field(np.asarray(B, dtype=bool), "B")
    Hg = scene.incident(g)
    return float(scene.k ** 2 * grid.h ** 2 * np.sum(np.abs(Hg[mask]) ** 2))


def coercivity_ratio(g: Density, scene: Scene) -> float:
    """|<T(Hg), Hg>_{L2(D)}| / ||Hg||^2_{L2(D)}"""
    support = scene.contrast.support
    f = scene.incident(g)
    Tf = middle_operator(f, scene)
    h2 = scene.grid.h ** 2
    pairing = h2 * np.vdot(f[support], Tf[support])
    energy = h2 * np.sum(np.abs(f[support]) ** 2)
    return float(abs(pairing) / energy)


def random_orthogonal_density(rng: np.random.Generator, excluded: np.ndarray, norm: float) -> Density:
    """Random density orthogonal to the columns of `excluded` (orthonormal, N x r)"""
    N = excluded.shape[0]
    c = rng.standard_normal(N) + 1j * rng.standard_normal(N)
    c = c - excluded @ (excluded.conj().T @ c)
    return Density(c).normalized(norm)

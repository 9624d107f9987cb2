"""
Acceptance harness: named numerical checks run as cases and reported as
passed, failed or error with their measured values.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from kerrsight.core.errors import KerrsightError, NoContractionError
from kerrsight.core.estimates import lipschitz_check, power_difference_failures
from kerrsight.core.forward import Contrast, FixedPointConfig, far_field, far_field_at, plane_wave, solve_linear
from kerrsight.core.geometry import Disk, Grid2D, Kite, rasterize
from kerrsight.core.herglotz import AngularQuadrature, Density, evaluate_density, herglotz, herglotz_adjoint
from kerrsight.core.ls_kernel import LinearSolveConfig
from kerrsight.core.oracles import born_disk_far_field, dense_linear_far_field, disk_refinement_study
from kerrsight.core.reconstruction import ObjectiveKind, OptimizerConfig, indicator_map
from kerrsight.core.scene import Scene, homogeneous_scene, linear_middle_operator
from kerrsight.core.special_functions import bessel_j0
from kerrsight.core.tracer import RunTracer, StepType, classify_error

log = logging.getLogger(__name__)


@dataclass
class CheckCase:
    """A single named check with its parameters"""
    id: str
    name: str
    check: str
    expected_behavior: str
    params: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class CheckResult:
    case_id: str
    status: str  # passed, failed, error
    measured: Dict[str, Any] = field(default_factory=dict)
    failure_reason: Optional[str] = None
    duration_ms: Optional[float] = None
    timestamp: Optional[datetime] = None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        if self.timestamp:
            data['timestamp'] = self.timestamp.isoformat()
        return data


@dataclass
class Outcome:
    passed: bool
    measured: Dict[str, Any]
    reason: Optional[str] = None


def check_disk_oracle(params: Dict[str, Any]) -> Outcome:
    k = params.get("k", 1.0)
    q0 = params.get("q0", 1.16)
    radius = params.get("radius", 1.0)
    R, J = params.get("R", 5.0), params.get("J", 20)
    study = disk_refinement_study(k, q0, radius, R, J)
    coarse, ratio = study.error_h, study.ratio
    measured = study.to_dict()
    bound, min_ratio = params.get("max_error", 2e-2), params.get("min_ratio", 3.0)
    if coarse > bound:
        return Outcome(False, measured, f"relative error {coarse:.3e} exceeds {bound:g}")
    if ratio < min_ratio:
        return Outcome(False, measured, f"refinement ratio {ratio:.2f} below {min_ratio:g}")
    return Outcome(True, measured)


def _kite_scene(params: Dict[str, Any], **overrides):
    settings = {
        "R": params.get("R", 5.0), "J": params.get("J", 20), "k": params.get("k", 1.0),
        "M": params.get("M", 256), "N": params.get("N", 16),
        "fixed_point": FixedPointConfig(params.get("tolerance", 1e-5), params.get("max_sweeps", 100)),
    }
    settings.update(overrides)
    terms = [(params.get("q0", 1.16), 0.0), (params.get("q1", 0.26), 2.0)]
    return homogeneous_scene(Kite(), terms, **settings)


def check_nonlinear_scaling(params: Dict[str, Any]) -> Outcome:
    norms = params.get("norms", [1.0, 0.5, 0.25])
    scene = _kite_scene(params)
    w_sup, sweeps = [], []
    for t in norms:
        g = Density.mode(scene.N, 0, t)
        result = scene.forward(scene.incident(g))
        w_sup.append(float(np.abs(result.w).max()))
        sweeps.append(result.iterations_used)
    slope = float(np.polyfit(np.log(norms), np.log(w_sup), 1)[0])
    measured = {"norms": norms, "w_sup": w_sup, "sweeps": sweeps, "exponent": slope}
    low, high = params.get("exponent_range", [2.7, 3.3])
    max_sweeps = params.get("sweep_budget", 30)
    if max(sweeps) > max_sweeps:
        return Outcome(False, measured, f"needed {max(sweeps)} sweeps, budget {max_sweeps}")
    if not low <= slope <= high:
        return Outcome(False, measured, f"fitted exponent {slope:.3f} outside [{low}, {high}]")
    return Outcome(True, measured)


def check_operator_identities(params: Dict[str, Any]) -> Outcome:
    rng = np.random.default_rng(params.get("seed", 0))
    M, N, k = params.get("M", 256), params.get("N", 16), params.get("k", 1.0)
    J = params.get("J", 20)
    quad = AngularQuadrature(M)
    scene = homogeneous_scene(Disk((0.0, 0.0), 1.0), [(1.16, 0.0)], J=J, k=k, M=M, N=N,
                              linear=LinearSolveConfig(krylov_tolerance=1e-12))
    grid, support = scene.grid, scene.contrast.support

    adjoint_gap = 0.0
    for _ in range(params.get("pairs", 100)):
        g = Density.random(rng, N)
        phi = np.where(support, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape), 0)
        lhs = grid.h ** 2 * np.vdot(phi[support], herglotz(g, grid, k, quad, scene.basis)[support])
        rhs = quad.weight * np.vdot(herglotz_adjoint(phi, support, grid, k, quad, scene.basis),
                                    evaluate_density(g, quad))
        adjoint_gap = max(adjoint_gap, abs(lhs - rhs) / max(abs(lhs), 1e-300))

    constant = Density.mode(N, 0, np.sqrt(2 * np.pi))
    X, Y = grid.mesh()
    bessel_gap = float(np.abs(herglotz(constant, grid, k, quad) - 2 * np.pi * bessel_j0(k * np.hypot(X, Y))).max())

    # H* T0 H through the FFT/GMRES path against an explicit dense solve
    factorization_gap = 0.0
    ys = grid.points()[support.ravel()]
    for _ in range(params.get("densities", 20)):
        g = Density.random(rng, N)
        middle = linear_middle_operator(scene.incident(g), scene)
        factored = herglotz_adjoint(middle, support, grid, k, quad, scene.basis)
        incident = np.exp(1j * k * ys @ quad.directions.T) @ (quad.weight * evaluate_density(g, quad))
        dense = dense_linear_far_field(grid, k, scene.contrast.q0, support, quad.angles, incident)
        factorization_gap = max(factorization_gap, float(np.abs(factored - dense).max() / np.abs(dense).max()))

    reciprocity_gap = 0.0
    q = scene.contrast.linear()
    for observed, incoming in rng.uniform(0.0, 2 * np.pi, size=(params.get("direction_pairs", 8), 2)):
        forward = _plane_wave_far_field(scene, q, observed, incoming)
        backward = _plane_wave_far_field(scene, q, incoming + np.pi, observed + np.pi)
        reciprocity_gap = max(reciprocity_gap, abs(forward - backward) / abs(forward))

    born = homogeneous_scene(Disk((0.0, 0.0), 1.0), [(0.01, 0.0)], J=J, k=k, M=M, N=N)
    ui = plane_wave(born.grid, k, 0.0)
    u0s = solve_linear(born.kernel, born.contrast, ui)
    pattern = far_field(born.kernel, born.contrast, ui, u0s, np.zeros_like(u0s), quad, basis=born.basis)
    expected = born_disk_far_field(k, 0.01, 1.0, quad.angles)
    born_gap = float(np.abs(pattern.samples - expected).max() / np.abs(expected).max())

    measured = {"adjointness": adjoint_gap, "herglotz_bessel": bessel_gap,
                "linear_factorization": factorization_gap, "reciprocity": reciprocity_gap,
                "born_disk": born_gap}
    limits = {"adjointness": 1e-10, "herglotz_bessel": 1e-8, "linear_factorization": 1e-8,
              "reciprocity": 1e-8, "born_disk": 5e-2}
    broken = [name for name, value in measured.items() if value > limits[name]]
    if broken:
        return Outcome(False, measured, "exceeded tolerance: " + ", ".join(broken))
    return Outcome(True, measured)


def _plane_wave_far_field(scene: Scene, q: Contrast, observed: float, incoming: float) -> complex:
    """u_inf(observed; incoming) for the linear medium q"""
    ui = plane_wave(scene.grid, scene.k, incoming)
    u0s = solve_linear(scene.kernel, q, ui, scene.linear)
    return complex(far_field_at([observed], scene.kernel, q, ui + u0s)[0])


def check_lipschitz_estimates(params: Dict[str, Any]) -> Outcome:
    failures = power_difference_failures(params.get("samples", 100_000), seed=params.get("seed", 0))
    grid = Grid2D(R=5.0, J=20)
    support = rasterize(Kite(), grid)
    contrast = Contrast.from_terms([(1.16, 0.0), (params.get("q1", 0.26), 2.0)], support)
    report = lipschitz_check(contrast, samples=params.get("pairs", 10_000), seed=params.get("seed", 0))
    measured = {"power_difference_failures": failures, "c_q": report.c_q, "kerr_sum": report.kerr_sum,
                "ratio_to_kerr_sum": report.worst_ratio, "proven_bound": report.proven_bound}
    if failures:
        return Outcome(False, measured, f"{failures} power difference violations")
    if not report.within_bound:
        return Outcome(False, measured, "empirical C_q above the proven bound")
    return Outcome(True, measured)


def check_no_contraction(params: Dict[str, Any]) -> Outcome:
    scene = _kite_scene(params)
    amplitude = params.get("amplification", 1e4)
    g = Density.mode(scene.N, 0, amplitude)
    try:
        result = scene.forward(scene.incident(g))
    except NoContractionError as exc:
        history = exc.increment_history
        return Outcome(bool(history), {"sweeps": len(history), "increment_history": history},
                       None if history else "no increment history recorded")
    return Outcome(False, {"sweeps": result.iterations_used}, "fixed point iteration converged unexpectedly")


def check_separation(params: Dict[str, Any]) -> Outcome:
    disk = Disk((0.0, 0.0), params.get("radius", 1.0))
    scene = homogeneous_scene(disk, [(params.get("q0", 1.16), 0.0), (params.get("q1", 0.26), 2.0)],
                              R=params.get("R", 5.0), J=params.get("J", 10), M=params.get("M", 64),
                              N=params.get("N", 8), rho=params.get("rho", 1.0))
    cfg = OptimizerConfig(rho=scene.rho, max_evals=params.get("max_evals", 200))
    measured, broken = {}, []
    for kind in ObjectiveKind:
        result = indicator_map(kind, scene.grid, scene, cfg, shift_stride=params.get("shift_stride", 4),
                               threads=params.get("threads", 1))
        ratio = result.separation_ratio(disk)
        monotone = bool(np.all(result.values[result.ok] <= result.initial[result.ok]))
        measured[kind.value] = {"separation": ratio, "monotone": monotone,
                                "success_fraction": result.success_fraction()}
        if ratio < params.get("min_separation", 5.0) or not monotone:
            broken.append(kind.value)
    if broken:
        return Outcome(False, measured, "insufficient separation: " + ", ".join(broken))
    return Outcome(True, measured)


CHECKS: Dict[str, Callable[[Dict[str, Any]], Outcome]] = {
    "disk_oracle": check_disk_oracle,
    "nonlinear_scaling": check_nonlinear_scaling,
    "operator_identities": check_operator_identities,
    "lipschitz_estimates": check_lipschitz_estimates,
    "no_contraction": check_no_contraction,
    "separation": check_separation,
}


class CheckHarness:
    """Runs check cases, optionally recording each as a step of a tracer run"""

    def __init__(self, tracer: Optional[RunTracer] = None):
        self.tracer = tracer
        self.cases: List[CheckCase] = []
        self.results: List[CheckResult] = []

    def add_case(self, case: CheckCase):
        if case.check not in CHECKS:
            raise KeyError(f"unknown check {case.check!r}; known: {sorted(CHECKS)}")
        self.cases.append(case)

    def load_cases(self, file_path):
        with open(file_path, 'r') as f:
            data = json.load(f)
        for case_data in data:
            self.add_case(CheckCase(**case_data))

    def run_case(self, case: CheckCase) -> CheckResult:
        start_time = time.time()
        try:
            outcome = CHECKS[case.check](case.params)
            status = "passed" if outcome.passed else "failed"
            result = CheckResult(case.id, status, outcome.measured, outcome.reason)
        except (KerrsightError, ArithmeticError, ValueError) as e:
            result = CheckResult(case.id, "error",
                                 {"error_type": classify_error(e).value},
                                 f"{type(e).__name__}: {e}")
        result.duration_ms = (time.time() - start_time) * 1000
        result.timestamp = datetime.now()
        if self.tracer is not None:
            self.tracer.log_step(StepType.ACCEPTANCE_CHECK,
                                 input_data={"id": case.id, "check": case.check, "params": case.params},
                                 output_data={"status": result.status, "measured": result.measured},
                                 duration_ms=result.duration_ms)
        log.info("%s: %s (%.0f ms)", case.name, result.status, result.duration_ms)
        if result.failure_reason:
            log.info("  reason: %s", result.failure_reason)
        return result

    def run_all(self) -> List[CheckResult]:
        self.results = [self.run_case(case) for case in self.cases]
        return self.results

    def rerun_failed(self) -> List[CheckResult]:
        failed_ids = {r.case_id for r in self.results if r.status in ("failed", "error")}
        return [self.run_case(case) for case in self.cases if case.id in failed_ids]

    def get_summary(self) -> Dict[str, Any]:
        total = len(self.results)
        passed = sum(1 for r in self.results if r.status == "passed")
        failed = sum(1 for r in self.results if r.status == "failed")
        errors = sum(1 for r in self.results if r.status == "error")
        avg_duration = sum(r.duration_ms or 0 for r in self.results) / total if total > 0 else 0
        return {
            "total_checks": total,
            "passed": passed,
            "failed": failed,
            "errors": errors,
            "pass_rate": passed / total if total > 0 else 0,
            "avg_duration_ms": avg_duration,
            "timestamp": datetime.now().isoformat(),
        }

    def save_results(self, file_path):
        data = {
            "summary": self.get_summary(),
            "cases": [c.to_dict() for c in self.cases],
            "results": [r.to_dict() for r in self.results],
        }
        Path(file_path).parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, 'w') as f:
            json.dump(data, f, indent=2, default=float)


def default_cases() -> List[CheckCase]:
    """Cases shipped with the package"""
    text = resources.files("kerrsight").joinpath("data/acceptance_cases.json").read_text()
    return [CheckCase(**case) for case in json.loads(text)]

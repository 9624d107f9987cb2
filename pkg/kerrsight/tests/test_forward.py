import numpy as np
import pytest

from kerrsight.core.errors import InvariantViolationError, NoContractionError
from kerrsight.core.forward import (
    Contrast,
    ContrastTerm,
    FixedPointConfig,
    far_field,
    far_field_at,
    far_field_constant,
    fixed_point_map,
    plane_wave,
    scattered_field_at,
    solve_linear,
    solve_nonlinear,
    validate_contrast,
)
from kerrsight.core.geometry import Disk, Grid2D, coverage, rasterize
from kerrsight.core.herglotz import AngularQuadrature
from kerrsight.core.ls_kernel import LinearSolveConfig, build_kernel
from kerrsight.core.oracles import born_disk_far_field
from kerrsight.core.tracer import RunTracer, StepType


@pytest.fixture
def support(grid, unit_disk):
    return rasterize(unit_disk, grid)


@pytest.fixture
def kerr(support):
    return Contrast.from_terms([(1.16, 0.0), (0.26, 2.0)], support)


@pytest.fixture
def kernel(grid):
    return build_kernel(grid, 1.0)


class TestContrast:
    def test_structure(self, kerr, support):
        assert kerr.alpha == 2.0
        assert not kerr.is_linear
        assert kerr.linear().is_linear
        assert kerr.q0_min() == pytest.approx(1.16)
        assert not np.any(kerr.q0[~support])

    def test_value(self, kerr, support):
        abs_u = np.full(support.shape, 2.0)
        value = kerr.value(abs_u)
        assert value[support][0] == pytest.approx(1.16 + 0.26 * 4)
        assert value[~support][0] == 0.0

    def test_rescaling(self, kerr, support):
        rescaled = kerr.rescaled(3e10)
        assert rescaled.q0[support][0] == pytest.approx(1.16)
        assert rescaled.terms[1].coefficient[support][0] == pytest.approx(0.26 * 9e20)

    def test_first_exponent_must_be_zero(self, support):
        with pytest.raises(InvariantViolationError):
            Contrast.from_terms([(0.26, 2.0)], support)

    def test_exponents_strictly_increasing(self, support):
        with pytest.raises(InvariantViolationError):
            Contrast.from_terms([(1.0, 0.0), (0.1, 2.0), (0.1, 2.0)], support)

    def test_coefficients_vanish_outside_support(self, support):
        with pytest.raises(InvariantViolationError):
            Contrast((ContrastTerm(np.ones(support.shape), 0.0),), support)

    def test_validate_rejects_nonpositive_essinf(self, support):
        with pytest.raises(InvariantViolationError):
            validate_contrast(Contrast.from_terms([(-1.0, 0.0)], support))

    def test_validate_reports_cq(self, kerr):
        report = validate_contrast(kerr, samples=5000)
        assert report.essinf_one_plus_q0 == pytest.approx(2.16)
        assert 0.5 * 0.26 <= report.c_q <= 1.5 * 0.26 + 1e-9
        assert report.to_dict()["exponents"] == [0.0, 2.0]


def test_fixed_point_config_validation():
    with pytest.raises(InvariantViolationError):
        FixedPointConfig(tolerance=0.0)
    with pytest.raises(InvariantViolationError):
        FixedPointConfig(max_sweeps=0)


def test_plane_wave(grid):
    ui = plane_wave(grid, 1.0, 0.3, amplitude=2.0)
    assert ui[grid.index_of(0, 0)] == 2.0
    np.testing.assert_allclose(np.abs(ui), 2.0)


def test_zero_contrast_scatters_nothing(grid, kernel, support):
    q = Contrast.from_terms([(0.0, 0.0)], support)
    ui = plane_wave(grid, 1.0, 0.0)
    assert not np.any(solve_linear(kernel, q, ui))
    result = solve_nonlinear(kernel, q, ui)
    assert not np.any(result.w)
    pattern = far_field(kernel, q, ui, result.u0s, result.w, 32)
    assert not np.any(pattern.samples)


def test_linear_medium_has_no_correction(grid, kernel, kerr):
    result = solve_nonlinear(kernel, kerr.linear(), plane_wave(grid, 1.0, 0.0))
    assert result.iterations_used == 1
    assert result.increment_history == [0.0]
    assert not np.any(result.w)


def test_nonlinear_solve_converges_to_a_fixed_point(grid, kernel, kerr):
    ui = plane_wave(grid, 1.0, 0.0, amplitude=0.5)
    fp = FixedPointConfig(tolerance=1e-5)
    result = solve_nonlinear(kernel, kerr, ui, fp)
    assert result.increment_history[-1] < fp.tolerance
    assert np.any(result.w)
    mapped = fixed_point_map(kernel, kerr, ui, result.u0s, result.w)
    assert np.abs(mapped - result.w).max() <= 2 * fp.tolerance * np.abs(result.w).max()
    np.testing.assert_allclose(result.total(ui), ui + result.u0s + result.w)


def test_correction_scales_cubically(grid, kernel, kerr):
    sup = []
    for t in (0.1, 0.05):
        result = solve_nonlinear(kernel, kerr, plane_wave(grid, 1.0, 0.0, amplitude=t))
        sup.append(np.abs(result.w).max())
    assert 7.5 <= sup[0] / sup[1] <= 8.5


def test_strong_field_raises_with_history(grid, kernel, kerr):
    with pytest.raises(NoContractionError) as excinfo:
        solve_nonlinear(kernel, kerr, plane_wave(grid, 1.0, 0.0, amplitude=1e4))
    assert excinfo.value.increment_history
    assert excinfo.value.increment_history[0] == 1.0


def test_far_field_matches_scattered_field_asymptotics(grid, kernel, kerr):
    ui = plane_wave(grid, 1.0, 0.0, amplitude=0.5)
    result = solve_nonlinear(kernel, kerr, ui)
    quad = AngularQuadrature(8)
    pattern = far_field(kernel, kerr, ui, result.u0s, result.w, quad)
    deviations = []
    for r in (2000.0, 4000.0):
        near = scattered_field_at(r * quad.directions, kernel, kerr, result.total(ui))
        asymptotic = far_field_constant(1.0) * np.exp(1j * r) / np.sqrt(r) * pattern.samples
        np.testing.assert_allclose(near, asymptotic, rtol=1e-2, atol=1e-2 * np.abs(asymptotic).max())
        deviations.append(np.abs(near - asymptotic).max())
    # the remainder decays like r^(-3/2)
    assert 0.3 <= deviations[1] / deviations[0] <= 0.42


def test_born_limit_for_weak_disk():
    grid = Grid2D(R=5.0, J=20)
    fraction = coverage(Disk((0.0, 0.0), 1.0), grid)
    q = Contrast.from_terms([(0.01 * fraction, 0.0)], fraction > 0)
    kernel = build_kernel(grid, 1.0)
    ui = plane_wave(grid, 1.0, 0.0)
    u0s = solve_linear(kernel, q, ui)
    quad = AngularQuadrature(64)
    pattern = far_field(kernel, q, ui, u0s, np.zeros_like(u0s), quad)
    expected = born_disk_far_field(1.0, 0.01, 1.0, quad.angles)
    assert np.abs(pattern.samples - expected).max() <= 5e-2 * np.abs(expected).max()
    assert pattern.M == 64


def test_plane_wave_reciprocity(grid, kernel, kerr, rng):
    q = kerr.linear()
    lin = LinearSolveConfig(krylov_tolerance=1e-12)

    def pattern(observed, incoming):
        ui = plane_wave(grid, 1.0, incoming)
        return far_field_at([observed], kernel, q, ui + solve_linear(kernel, q, ui, lin))[0]

    for observed, incoming in rng.uniform(0.0, 2 * np.pi, size=(8, 2)):
        forward = pattern(observed, incoming)
        backward = pattern(incoming + np.pi, observed + np.pi)
        assert abs(forward - backward) <= 1e-8 * abs(forward)


def test_far_field_at_matches_quadrature_nodes(grid, kernel, kerr):
    ui = plane_wave(grid, 1.0, 0.3)
    u0s = solve_linear(kernel, kerr.linear(), ui)
    quad = AngularQuadrature(16)
    pattern = far_field(kernel, kerr.linear(), ui, u0s, np.zeros_like(u0s), quad)
    np.testing.assert_allclose(far_field_at(quad.angles, kernel, kerr.linear(), ui + u0s), pattern.samples,
                               rtol=1e-12, atol=1e-14)


def test_gmres_solves_are_traced(grid, kernel, kerr):
    tracer = RunTracer()
    tracer.start_run("forward")
    result = solve_nonlinear(kernel, kerr, plane_wave(grid, 1.0, 0.0, amplitude=0.5), tracer=tracer)
    linear = [s for s in tracer.steps if s.step_type is StepType.LINEAR_SOLVE]
    # one solve for u0s and one per sweep
    assert len(linear) == 1 + result.iterations_used
    assert all(s.output_data["converged"] for s in linear)
    assert all(s.output_data["residual"] <= 1e-10 for s in linear)
    assert all(s.output_data["iterations"] >= 1 for s in linear)

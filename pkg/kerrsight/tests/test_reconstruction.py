import numpy as np
import pytest

from kerrsight.core.errors import AllDegenerateError, DegenerateDenominatorError, InvalidParameterError
from kerrsight.core.geometry import Disk, Grid2D
from kerrsight.core.herglotz import SQRT_2PI, Density, evaluate_density
from kerrsight.core.reconstruction import (
    STATUS_OK,
    CandidateBank,
    ObjectiveKind,
    OptimizerConfig,
    build_candidate_bank,
    candidate_density,
    coercivity_ratio,
    global_search_init,
    indicator_map,
    minimize_on_sphere,
    numerator,
    objective,
    probing_quadratic_form,
    random_orthogonal_density,
    search_bank,
    separation_ratio,
    shift_points,
    test_function as make_test_function,
)
from kerrsight.core.scene import homogeneous_scene, leading_singular_vectors


def test_optimizer_defaults():
    cfg = OptimizerConfig(rho=2.0)
    assert cfg.fd_step == pytest.approx(2e-4)
    assert cfg.denominator_floor == pytest.approx(2e-10 * SQRT_2PI)
    with pytest.raises(InvalidParameterError):
        OptimizerConfig(rho=0.0)
    with pytest.raises(InvalidParameterError):
        OptimizerConfig(rho=1.0, step_shrink=1.5)


def test_denominator_is_the_quadrature_inner_product(kite_scene, rng):
    scene = kite_scene
    phi = make_test_function((0.5, -1.0), scene.k, scene.quadrature, scene.N)
    g = Density.random(rng, scene.N)
    by_coefficients = np.vdot(phi.coeffs, g.coeffs)
    by_nodes = scene.quadrature.inner(evaluate_density(g, scene.quadrature), phi.values)
    assert abs(by_coefficients - by_nodes) <= 1e-12 * abs(by_nodes)


def test_degenerate_denominator(kite_scene, rng):
    scene = kite_scene
    phi = make_test_function((0.0, 0.0), scene.k, scene.quadrature, scene.N)
    c = rng.standard_normal(scene.N) + 1j * rng.standard_normal(scene.N)
    c -= (np.vdot(phi.coeffs, c) / np.vdot(phi.coeffs, phi.coeffs)) * phi.coeffs
    g = Density(c).normalized(scene.rho)
    with pytest.raises(DegenerateDenominatorError):
        objective(ObjectiveKind.FACTORIZATION, g, phi, scene)


def test_zero_contrast_objective_vanishes(rng):
    scene = homogeneous_scene(Disk((0.0, 0.0), 1.0), [(0.0, 0.0)], J=8, M=32, N=8)
    g = Density.random(rng, 8)
    for kind in ObjectiveKind:
        assert objective(kind, g, (1.0, 0.0), scene) == 0.0


def test_shift_points_follow_the_stride():
    sampling = Grid2D(R=5.0, J=10)
    shifts = shift_points(sampling, 4)
    assert len(shifts) == 25
    assert set(np.round(shifts[:, 0] / sampling.h).astype(int)) == {-8, -4, 0, 4, 8}
    assert len(shift_points(sampling, 1)) == sampling.n ** 2
    with pytest.raises(InvalidParameterError):
        shift_points(sampling, 0)


def test_candidate_density_norm(kite_scene):
    g = candidate_density(2, (1.0, -0.5), kite_scene, phase=1)
    assert g.norm == pytest.approx(kite_scene.rho)


def test_bank_derives_the_second_phase(kite_scene):
    bank = build_candidate_bank(kite_scene, np.array([[0.0, 0.0], [1.0, 0.5]]))
    assert bank.numerators.shape == (kite_scene.N, 2)
    assert bank.size == 4 * kite_scene.N
    direct = numerator(bank.density(1, 3, 1), kite_scene)
    assert abs(direct - bank.numerators[3, 1]) <= 1e-6 * abs(direct)


def test_search_prefers_phase_zero_on_ties(kite_scene):
    bank = build_candidate_bank(kite_scene, np.array([[0.0, 0.0]]))
    phi = make_test_function((0.5, 0.5), kite_scene.k, kite_scene.quadrature, kite_scene.N)
    floor = OptimizerConfig(rho=kite_scene.rho).denominator_floor
    for kind in ObjectiveKind:
        found = search_bank(kind, phi, bank, floor)
        assert found.phase == 0
        assert found.candidates == bank.size


def test_search_with_only_degenerate_candidates(kite_scene):
    N = kite_scene.N
    bank = CandidateBank(np.arange(-N // 2, N // 2), np.zeros((1, 2)),
                         np.zeros((N, 1, N), dtype=complex), np.zeros((N, 1), dtype=complex))
    phi = make_test_function((0.0, 0.0), kite_scene.k, kite_scene.quadrature, N)
    with pytest.raises(AllDegenerateError):
        search_bank(ObjectiveKind.MONOTONICITY, phi, bank, 1e-10)


def test_global_search_value_is_the_objective(kite_scene):
    z = (0.5, 0.0)
    found = global_search_init(ObjectiveKind.FACTORIZATION, z, kite_scene)
    recomputed = objective(ObjectiveKind.FACTORIZATION, found.density, z, kite_scene)
    assert found.value == pytest.approx(recomputed, rel=1e-6)


def test_minimize_on_sphere_descends(kite_scene):
    z = (0.0, 0.0)
    found = global_search_init(ObjectiveKind.MONOTONICITY, z, kite_scene)
    cfg = OptimizerConfig(rho=kite_scene.rho, max_evals=60)
    result = minimize_on_sphere(ObjectiveKind.MONOTONICITY, z, found.density, kite_scene, cfg)
    assert result.value <= result.initial_value
    assert result.initial_value == pytest.approx(found.value, rel=1e-6)
    assert result.density.norm == pytest.approx(kite_scene.rho, rel=1e-12)
    assert result.evals <= cfg.max_evals
    assert result.reason in {"budget", "stationary", "stall", "no_descent"}
    assert list(result.history) == sorted(result.history, reverse=True)


def test_indicator_map_is_thread_count_invariant(kite_scene):
    sampling = Grid2D(R=3.0, J=1)
    cfg = OptimizerConfig(rho=kite_scene.rho, max_evals=40)
    bank = build_candidate_bank(kite_scene, shift_points(sampling))
    serial = indicator_map(ObjectiveKind.FACTORIZATION, sampling, kite_scene, cfg, bank=bank, threads=1)
    parallel = indicator_map(ObjectiveKind.FACTORIZATION, sampling, kite_scene, cfg, bank=bank, threads=3)
    np.testing.assert_array_equal(serial.values, parallel.values)
    np.testing.assert_array_equal(serial.initial, parallel.initial)
    np.testing.assert_array_equal(serial.evals, parallel.evals)
    assert serial.values.shape == sampling.shape
    assert np.all(serial.status == STATUS_OK)
    assert np.all(serial.values <= serial.initial)
    assert serial.success_fraction() == 1.0


def test_self_shifts_build_a_bank_per_point(kite_scene):
    sampling = Grid2D(R=2.0, J=1)
    cfg = OptimizerConfig(rho=kite_scene.rho, max_evals=5)
    result = indicator_map(ObjectiveKind.MONOTONICITY, sampling, kite_scene, cfg, shifts="self")
    assert np.all(result.ok)
    assert np.all(np.isfinite(result.initial))


def test_separation_ratio_of_a_synthetic_map():
    grid = Grid2D(R=5.0, J=10)
    disk = Disk((0.0, 0.0), 1.5)
    X, Y = grid.mesh()
    values = np.where(np.hypot(X, Y) <= 1.5, 1.0, 0.1)
    values[0, 0] = np.nan
    assert separation_ratio(values, grid, disk) == pytest.approx(10.0)


def test_probing_form_grows_with_the_region(kite_scene, rng):
    g = Density.random(rng, kite_scene.N)
    small = probing_quadratic_form(Disk((0.0, 0.0), 0.5), g, kite_scene)
    large = probing_quadratic_form(Disk((0.0, 0.0), 2.0), g, kite_scene)
    assert probing_quadratic_form(None, g, kite_scene) == 0.0
    assert 0 < small < large


def test_middle_operator_is_coercive_on_admissible_densities(kerr_disk_scene, rng):
    ratios = np.array([
        coercivity_ratio(Density.random(rng, kerr_disk_scene.N, norm=rng.uniform(0.05, 0.5)), kerr_disk_scene)
        for _ in range(50)
    ])
    assert np.all(np.isfinite(ratios))
    fitted = ratios.min()
    assert fitted > 0


def test_monotonicity_lower_bound_on_an_inner_disk(kerr_disk_scene, rng):
    scene = kerr_disk_scene
    inner = Disk((0.0, 0.0), 0.6)
    V = leading_singular_vectors(scene.with_contrast(scene.contrast.linear()), 5)
    q0_min = 1.16
    for _ in range(20):
        g = random_orthogonal_density(rng, V, 0.3)
        form = numerator(g, scene).real
        assert form >= 0.1 * (q0_min / 2) * probing_quadratic_form(inner, g, scene)


def test_random_orthogonal_density(kite_scene, rng):
    V = leading_singular_vectors(kite_scene.with_contrast(kite_scene.contrast.linear()), 2)
    g = random_orthogonal_density(rng, V, 0.2)
    assert g.norm == pytest.approx(0.2)
    np.testing.assert_allclose(V.conj().T @ g.coeffs, 0.0, atol=1e-12)


@pytest.mark.slow
def test_desk_disk_separation(unit_disk):
    scene = homogeneous_scene(unit_disk, [(1.16, 0.0), (0.26, 2.0)], J=10, M=64, N=8)
    cfg = OptimizerConfig(rho=1.0, max_evals=200)
    for kind in ObjectiveKind:
        result = indicator_map(kind, scene.grid, scene, cfg, shift_stride=4, threads=4)
        assert result.success_fraction() >= 0.9
        assert np.all(result.values[result.ok] <= result.initial[result.ok])
        assert result.separation_ratio(unit_disk) >= 5.0


def test_failed_points_keep_their_evaluation_count(kite_scene):
    sampling = Grid2D(R=3.0, J=1)
    bank = build_candidate_bank(kite_scene, shift_points(sampling))
    # the candidates are rescaled far beyond the contraction regime
    cfg = OptimizerConfig(rho=1e4, max_evals=10)
    result = indicator_map(ObjectiveKind.MONOTONICITY, sampling, kite_scene, cfg, bank=bank)
    assert np.all(result.status == "no_contraction")
    assert np.all(result.evals == 1)
    assert np.all(np.isfinite(result.initial))
    assert np.all(np.isnan(result.values))
    assert result.success_fraction() == 0.0

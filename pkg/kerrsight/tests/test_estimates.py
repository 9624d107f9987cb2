import pytest

from kerrsight.core.estimates import lipschitz_check, power_difference_holds, power_difference_failures, proven_cq_bound
from kerrsight.core.forward import Contrast
from kerrsight.core.geometry import Kite, rasterize


def test_power_difference_bound_on_random_samples():
    assert power_difference_failures(samples=20_000, seed=7) == 0


@pytest.mark.parametrize("a, b, alpha", [
    (1.0, 1.0, 2.0),
    (1 + 1j, 0.0, 3.5),
    (2.0, -2.0, 1.0),
    (1.0, 1.0 + 1e-9j, 5.0),
    (3 - 4j, 0.5j, 0.0),
])
def test_power_difference_bound_pointwise(a, b, alpha):
    assert power_difference_holds(a, b, alpha)


def test_proven_bound_for_kerr_term(grid):
    support = rasterize(Kite(), grid)
    q = Contrast.from_terms([(1.16, 0.0), (0.26, 2.0)], support)
    assert proven_cq_bound(q) == pytest.approx(2 * 2 * 0.26)
    q_sub = Contrast.from_terms([(1.16, 0.0), (0.3, 0.5)], support)
    assert proven_cq_bound(q_sub) == pytest.approx(2 * 0.3)


def test_empirical_constant_within_proven_bound(grid):
    support = rasterize(Kite(), grid)
    q = Contrast.from_terms([(1.16, 0.0), (0.26, 2.0), (0.05, 4.0)], support)
    report = lipschitz_check(q, samples=5000, seed=3)
    assert report.within_bound
    assert report.kerr_sum == pytest.approx(0.31)
    assert report.worst_ratio == pytest.approx(report.c_q / 0.31)


def test_linear_medium_has_zero_constant(grid):
    q = Contrast.from_terms([(1.16, 0.0)], rasterize(Kite(), grid))
    report = lipschitz_check(q)
    assert report.c_q == 0.0 and report.worst_ratio == 0.0

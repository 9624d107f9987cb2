"""
Executable checks of the analytic estimates the forward theory rests on.
"""

from dataclasses import dataclass

import numpy as np

from kerrsight.core.forward import Contrast, empirical_cq

SLACK = 1e-12


def power_difference_holds(a: complex, b: complex, alpha: float) -> bool:
    """| |a|^alpha a - |b|^alpha b | <= 2 (|a| + |b|)^alpha |a - b|, with a 1e-12 slack."""
    a, b = complex(a), complex(b)
    lhs = abs(abs(a) ** alpha * a - abs(b) ** alpha * b)
    rhs = 2 * (abs(a) + abs(b)) ** alpha * abs(a - b)
    return lhs <= rhs + SLACK * max(1.0, rhs)


def power_difference_failures(samples: int = 100_000, seed: int = 0, max_alpha: float = 5.0) -> int:
    """Vectorized randomized check; returns the number of violating samples"""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
    b = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
    # half the pairs close together, where the bound is tightest
    b[::2] = a[::2] + 1e-3 * b[::2]
    alpha = rng.uniform(0.0, max_alpha, size=samples)
    alpha[alpha == 0.0] = max_alpha
    lhs = np.abs(np.abs(a) ** alpha * a - np.abs(b) ** alpha * b)
    rhs = 2 * (np.abs(a) + np.abs(b)) ** alpha * np.abs(a - b)
    return int(np.count_nonzero(lhs > rhs + SLACK * np.maximum(1.0, rhs)))


@dataclass(frozen=True)
class LipschitzReport:
    c_q: float
    kerr_sum: float
    worst_ratio: float
    proven_bound: float

    @property
    def within_bound(self) -> bool:
        return self.c_q <= self.proven_bound + 1e-9


def proven_cq_bound(q: Contrast) -> float:
    """
    sum_l 2 max(1, 2^(alpha_l - 1)) ||q_l||_inf

    From the power difference bound together with (|a| + |b|)^s <= max(1, 2^(s-1)) (|a|^s + |b|^s)
    and |z|^alpha_l <= |z|^alpha_1 on |z| <= 1.
    """
    return float(sum(2 * max(1.0, 2.0 ** (t.exponent - 1)) * np.abs(t.coefficient).max()
                     for t in q.nonlinear_terms))


def lipschitz_check(q: Contrast, samples: int = 10_000, seed: int = 0) -> LipschitzReport:
    """
    Empirical C_q over random |z1|, |z2| <= 1 compared with the coefficient
    sum sum_l ||q_l||_inf and with the bound that is actually proven.
    """
    c_q = empirical_cq(q, samples=samples, seed=seed)
    kerr_sum = float(sum(np.abs(t.coefficient).max() for t in q.nonlinear_terms))
    ratio = c_q / kerr_sum if kerr_sum > 0 else 0.0
    return LipschitzReport(c_q=c_q, kerr_sum=kerr_sum, worst_ratio=ratio, proven_bound=proven_cq_bound(q))

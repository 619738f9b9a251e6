"""Goodness-of-fit and pairwise independence tests that drive splitting.

All tests return a :class:`TestOutcome`.  A test that cannot be carried out
on the available data (too few samples for two classes, ties leaving an
empty class) is reported with ``performed=False`` and ``p_value=1``, so an
under-powered element simply passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .elements import MarginalKind, MarginalModel, linear_inverse_cdf
from .special import SQRT2, chi2_sf, erfcinv, kolmogorov_sf, norm_sf


class GofStatistic(str, Enum):
    CHI2 = "chi2"
    KS = "ks"


class IndepStatistic(str, Enum):
    CHI2 = "chi2"
    KENDALL = "kendall"


@dataclass(frozen=True)
class TestOutcome:
    statistic: float
    dof: float
    p_value: float
    performed: bool = True

    __test__ = False  # not a pytest class

    @classmethod
    def skipped(cls):
        return cls(0.0, 0.0, 1.0, False)

    def rejects(self, alpha: float) -> bool:
        return self.performed and self.p_value < alpha


@dataclass(frozen=True)
class SignificanceConfig:
    alpha_g: float = 0.001
    alpha_d: float = 0.001
    gof_statistic: GofStatistic = GofStatistic.CHI2
    indep_statistic: IndepStatistic = IndepStatistic.CHI2

    def __post_init__(self):
        for name in ("alpha_g", "alpha_d"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        object.__setattr__(self, "gof_statistic", GofStatistic(self.gof_statistic))
        object.__setattr__(self, "indep_statistic", IndepStatistic(self.indep_statistic))


def mann_wald_class_count(n: int, alpha_g: float) -> int:
    """Number of equal-count classes for the chi-squared goodness-of-fit test.

    The smaller of the five-samples-per-class rule of thumb and the Mann-Wald
    power-optimal count ``4 (2 (n-1)^2 / c^2)^(1/5)`` with
    ``c = sqrt(2) erfcinv(2 alpha_g)``, floored.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    c = SQRT2 * erfcinv(2.0 * alpha_g)
    # alpha_g = 0.5 gives c = 0 and leaves only the rule of thumb
    mw = 4.0 * (2.0 * (n - 1) ** 2 / (c * c)) ** 0.2 if c != 0.0 else math.inf
    return int(math.floor(min(n / 5.0, mw)))


def _sorted01(coords, assume_sorted):
    z = np.asarray(coords, dtype=np.float64).ravel()
    return z if assume_sorted else np.sort(z)


def null_quantiles(null: MarginalModel, n_c: int) -> np.ndarray:
    """Class edges ``F^-1(j / n_c)``, ``j = 0..n_c``, of the null marginal on ``[0, 1]``."""
    u = np.arange(n_c + 1) / n_c
    if null.kind is MarginalKind.CONSTANT or null.theta == 0.0:
        edges = u
    else:
        edges = linear_inverse_cdf(u, null.theta)
    edges[0], edges[-1] = 0.0, 1.0
    return edges


def chi2_gof(coords, null: MarginalModel, alpha_g: float, assume_sorted: bool = False) -> TestOutcome:
    """Pearson chi-squared test of rescaled coordinates against a marginal model.

    The ``n_c`` classes are equiprobable under the null, so every class
    expects ``k / n_c`` samples and, for data compatible with the null,
    holds approximately that many.  A linear null whose slope was estimated
    from the same data loses one extra degree of freedom.
    """
    z = _sorted01(coords, assume_sorted)
    k = z.size
    if k == 0:
        return TestOutcome.skipped()
    n_c = mann_wald_class_count(k, alpha_g)
    dof = n_c - 1 - null.n_params
    if n_c < 2 or dof < 1:
        return TestOutcome.skipped()
    edges = null_quantiles(null, n_c)
    pos = np.empty(n_c + 1, dtype=np.intp)
    pos[0], pos[-1] = 0, k
    pos[1:-1] = np.searchsorted(z, edges[1:-1], side="left")
    observed = np.diff(pos).astype(np.float64)
    expected = k / n_c
    stat = float(np.sum((observed - expected) ** 2) / expected)
    return TestOutcome(stat, float(dof), chi2_sf(stat, dof))


def ks_gof(coords, null: MarginalModel, alpha_g: Optional[float] = None,
           assume_sorted: bool = False) -> TestOutcome:
    """Kolmogorov-Smirnov test against the closed-form null CDF.

    The p-value uses the limiting Kolmogorov law with Stephens' finite-sample
    scaling ``(sqrt(n) + 0.12 + 0.11/sqrt(n)) D``.  A slope estimated from
    the data is treated as known.
    """
    z = _sorted01(coords, assume_sorted)
    k = z.size
    if k == 0:
        return TestOutcome.skipped()
    cdf = null.cdf01(z)
    i = np.arange(1, k + 1)
    d_plus = np.max(i / k - cdf)
    d_minus = np.max(cdf - (i - 1) / k)
    stat = float(max(d_plus, d_minus))
    rk = math.sqrt(k)
    return TestOutcome(stat, 0.0, kolmogorov_sf((rk + 0.12 + 0.11 / rk) * stat))


def gof_test(coords, null: MarginalModel, alpha_g: float, statistic=GofStatistic.CHI2,
             assume_sorted: bool = False) -> TestOutcome:
    if GofStatistic(statistic) is GofStatistic.KS:
        return ks_gof(coords, null, alpha_g, assume_sorted)
    return chi2_gof(coords, null, alpha_g, assume_sorted)


def independence_classes(n: int, n_c: int) -> int:
    """Classes per direction for the contingency table, or 0 when the test is skipped."""
    b = max(2, int(math.isqrt(max(n_c, 0))))
    if n < b * b:
        return 0
    return b


def rank_classes(coords, b: int) -> np.ndarray:
    """Equal-count class label of every sample; ties broken by input order."""
    c = np.asarray(coords)
    n = c.size
    order = np.argsort(c, kind="stable")
    labels = np.empty(n, dtype=np.intp)
    labels[order] = (np.arange(n) * b) // n
    return labels


def contingency_chi2(labels_i: np.ndarray, labels_j: np.ndarray, b: int) -> TestOutcome:
    n = labels_i.size
    table = np.bincount(labels_i * b + labels_j, minlength=b * b).reshape(b, b).astype(np.float64)
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    mask = expected > 0.0
    stat = float(np.sum((table[mask] - expected[mask]) ** 2 / expected[mask]))
    dof = (b - 1) ** 2
    return TestOutcome(stat, float(dof), chi2_sf(stat, dof))


def chi2_independence(coords_i, coords_j, n_c: int, alpha_d: Optional[float] = None) -> TestOutcome:
    """Pearson chi-squared independence test on a ``b x b`` equal-count contingency table.

    ``b = max(2, floor(sqrt(n_c)))`` classes per direction, each built from
    that direction's own order statistics.
    """
    ci = np.asarray(coords_i, dtype=np.float64).ravel()
    cj = np.asarray(coords_j, dtype=np.float64).ravel()
    if ci.size != cj.size:
        raise ValueError("coordinate lists differ in length")
    b = independence_classes(ci.size, n_c)
    if b < 2:
        return TestOutcome.skipped()
    return contingency_chi2(rank_classes(ci, b), rank_classes(cj, b), b)


def _dense_ranks(values: np.ndarray) -> np.ndarray:
    _, inv = np.unique(values, return_inverse=True)
    return inv.ravel().astype(np.int64)


def count_inversions(seq) -> int:
    """Pairs ``i < j`` with ``seq[i] > seq[j]`` by bottom-up merge counting.

    Each pass merges neighbouring sorted blocks of width ``w``; inversions
    between a left block and its right partner are counted with one
    vectorized ``searchsorted`` on block-offset keys.
    """
    v = _dense_ranks(np.asarray(seq))
    n = v.size
    if n < 2:
        return 0
    span = int(v.max()) + 1
    pos = np.arange(n)
    total = 0
    w = 1
    while w < n:
        pair = pos // (2 * w)
        is_right = (pos // w) % 2 == 1
        keys = pair * span + v
        left_keys = keys[~is_right]
        right_keys = keys[is_right]
        right_pair = pair[is_right]
        # end of each pair's left block inside left_keys
        left_end = np.searchsorted(left_keys, (right_pair + 1) * span, side="left")
        not_greater = np.searchsorted(left_keys, right_keys, side="right")
        total += int(np.sum(left_end - not_greater))
        # merge: stable sort of keys within pairs, blocks already sorted
        order = np.argsort(keys, kind="stable")
        v = v[order]
        w *= 2
    return total


def _tie_sums(values):
    _, counts = np.unique(values, return_counts=True)
    t = counts.astype(np.float64)
    return (float(np.sum(t * (t - 1) / 2)),
            float(np.sum(t * (t - 1) * (2 * t + 5))),
            float(np.sum(t * (t - 1))),
            float(np.sum(t * (t - 1) * (t - 2))))


def kendall_tau_b(x, y) -> tuple[float, float]:
    """Tie-corrected Kendall tau-b and the score ``S`` (concordant minus discordant)."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    n = x.size
    n0 = n * (n - 1) / 2
    order = np.lexsort((y, x))
    xs = x[order]
    ys = y[order]
    n1 = _tie_sums(xs)[0]
    n2 = _tie_sums(ys)[0]
    # joint ties: equal runs in the (x, y) sorted sequence
    new_run = np.ones(n, dtype=bool)
    new_run[1:] = (xs[1:] != xs[:-1]) | (ys[1:] != ys[:-1])
    run_id = np.cumsum(new_run)
    _, joint = np.unique(run_id, return_counts=True)
    n3 = float(np.sum(joint * (joint - 1) / 2))
    discordant = count_inversions(ys)
    score = n0 - n1 - n2 + n3 - 2.0 * discordant
    denom = math.sqrt((n0 - n1) * (n0 - n2)) if n0 > n1 and n0 > n2 else 0.0
    tau = score / denom if denom > 0 else float("nan")
    return tau, score


def kendall_tau_independence(coords_i, coords_j, alpha_d: Optional[float] = None) -> TestOutcome:
    """Two-sided independence test from Kendall's tau-b.

    The normal approximation uses the tie-adjusted variance of the score;
    without ties it reduces to ``Var(tau) = 2 (2n + 5) / (9 n (n - 1))``.
    """
    x = np.asarray(coords_i, dtype=np.float64).ravel()
    y = np.asarray(coords_j, dtype=np.float64).ravel()
    n = x.size
    if n != y.size:
        raise ValueError("coordinate lists differ in length")
    if n < 2:
        return TestOutcome.skipped()
    tau, score = kendall_tau_b(x, y)
    if not math.isfinite(tau):
        return TestOutcome.skipped()
    _, vx, ax, bx = _tie_sums(x)
    _, vy, ay, by = _tie_sums(y)
    v0 = n * (n - 1) * (2 * n + 5)
    var = (v0 - vx - vy) / 18.0 + ax * ay / (2.0 * n * (n - 1))
    if n > 2:
        var += bx * by / (9.0 * n * (n - 1) * (n - 2))
    if var <= 0:
        return TestOutcome.skipped()
    z = score / math.sqrt(var)
    p = min(1.0, 2.0 * norm_sf(abs(z)))
    return TestOutcome(tau, 0.0, p)

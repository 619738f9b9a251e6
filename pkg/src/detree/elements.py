"""Distribution elements: a cuboid with a product of 1-d marginal densities.

Marginals are either constant or linear.  In the element's rescaled
coordinate ``z = (x - l) / (u - l)`` a linear marginal reads
``(z - 1/2) * theta + 1`` with ``theta`` restricted to ``[-2, 2]`` so the
density never goes negative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import UnsplittableInterval

THETA_MAX = 2.0


class Order(str, Enum):
    CONSTANT = "constant"
    LINEAR = "linear"


class SplitMode(str, Enum):
    SIZE = "size"
    SCORE = "score"


@dataclass(frozen=True)
class Cuboid:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64).ravel()
        upper = np.asarray(self.upper, dtype=np.float64).ravel()
        if lower.shape != upper.shape:
            raise ValueError("cuboid bounds differ in length")
        if not np.all(lower < upper):
            raise ValueError(f"cuboid needs lower < upper in every dimension: {lower} vs {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, points, closed_upper=None) -> np.ndarray:
        """Half-open membership ``l <= x < u``; dims flagged in ``closed_upper`` include ``u``."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if closed_upper is None:
            closed_upper = np.ones(self.d, dtype=bool)
        closed_upper = np.asarray(closed_upper, dtype=bool)
        below = np.where(closed_upper, pts <= self.upper, pts < self.upper)
        return np.all((pts >= self.lower) & below, axis=1)


class MarginalKind(str, Enum):
    CONSTANT = "constant"
    LINEAR = "linear"


@dataclass(frozen=True)
class MarginalModel:
    kind: MarginalKind = MarginalKind.CONSTANT
    theta: float = 0.0

    def __post_init__(self):
        kind = MarginalKind(self.kind)
        theta = float(self.theta) if kind is MarginalKind.LINEAR else 0.0
        if not -THETA_MAX <= theta <= THETA_MAX:
            raise ValueError(f"slope must lie in [-2, 2], got {theta}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "theta", theta)

    @classmethod
    def constant(cls):
        return cls(MarginalKind.CONSTANT)

    @classmethod
    def linear(cls, theta):
        return cls(MarginalKind.LINEAR, theta)

    @property
    def n_params(self) -> int:
        return 1 if self.kind is MarginalKind.LINEAR else 0

    def pdf01(self, z):
        """Density on the unit interval."""
        z = np.asarray(z, dtype=np.float64)
        return (z - 0.5) * self.theta + 1.0

    def cdf01(self, z):
        """Closed-form CDF on the unit interval; clamps outside ``[0, 1]``."""
        z = np.clip(np.asarray(z, dtype=np.float64), 0.0, 1.0)
        return z + 0.5 * self.theta * (z * z - z)


def mmse_slope(mean: float, variance: float, count: int) -> float:
    """Shrunk slope estimate ``n s^3 / (n s^2 + 144 var)`` clipped to ``[-2, 2]``.

    ``mean`` and ``variance`` are moments of coordinates already rescaled to
    the unit interval; ``s = 6 (2 mean - 1)`` is the plain moment estimate.
    """
    s = 6.0 * (2.0 * mean - 1.0)
    num = count * s ** 3
    den = count * s * s + 144.0 * variance
    if den == 0.0:
        return 0.0
    return min(THETA_MAX, max(-THETA_MAX, num / den))


def mmse_slopes(mean: np.ndarray, variance: np.ndarray, count: int) -> np.ndarray:
    """Vectorized :func:`mmse_slope` over dimensions."""
    s = 6.0 * (2.0 * np.asarray(mean) - 1.0)
    num = count * s ** 3
    den = count * s * s + 144.0 * np.asarray(variance)
    with np.errstate(divide="ignore", invalid="ignore"):
        theta = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), 0.0)
    return np.clip(theta, -THETA_MAX, THETA_MAX)


def marginal_density(model: MarginalModel, x, l: float, u: float):
    """Marginal density on ``[l, u]``; zero outside the closed interval."""
    width = u - l
    if not width > 0:
        raise ValueError(f"interval must satisfy l < u, got [{l}, {u}]")
    x = np.asarray(x, dtype=np.float64)
    z = (x - l) / width
    val = ((z - 0.5) * model.theta + 1.0) / width
    out = np.where((x >= l) & (x <= u), val, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DistributionElement:
    cuboid: Cuboid
    marginals: tuple
    count: int
    n_total: int
    closed_upper: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.marginals) != self.cuboid.d:
            raise ValueError("need one marginal per dimension")
        if self.count < 0 or self.count > self.n_total:
            raise ValueError("count must lie in [0, n_total]")
        object.__setattr__(self, "marginals", tuple(self.marginals))

    @property
    def weight(self) -> float:
        return self.count / self.n_total if self.n_total else 0.0

    @property
    def thetas(self) -> np.ndarray:
        return np.array([m.theta for m in self.marginals])

    def integral(self) -> float:
        # each closed-form marginal integral is F(1) - F(0)
        total = self.weight
        for m in self.marginals:
            total *= float(m.cdf01(1.0) - m.cdf01(0.0))
        return total


def element_density(de: DistributionElement, x) -> np.ndarray | float:
    """Density of a single element; zero outside its cuboid."""
    pts = np.atleast_2d(np.asarray(x, dtype=np.float64))
    inside = de.cuboid.contains(pts, de.closed_upper)
    z = (pts - de.cuboid.lower) / de.cuboid.widths
    vals = ((z - 0.5) * de.thetas + 1.0) / de.cuboid.widths
    dens = np.where(inside, de.weight * np.prod(vals, axis=1), 0.0)
    if np.ndim(x) <= 1 and pts.shape[0] == 1:
        return float(dens[0])
    return dens


def score_threshold(coords: Sequence[float], lower: float, upper: float) -> float:
    """Median-straddling threshold between order statistics ``ceil(k/2)-1`` and ``ceil(k/2)``."""
    c = np.asarray(coords, dtype=np.float64)
    k = c.size
    if k < 2:
        raise UnsplittableInterval(f"score split needs at least two samples, got {k}")
    hi = (k + 1) // 2
    part = np.partition(c, (hi - 1, hi))
    thr = 0.5 * (part[hi - 1] + part[hi])
    if not lower < thr < upper:
        raise UnsplittableInterval(f"threshold {thr!r} not strictly inside [{lower!r}, {upper!r}]")
    return float(thr)


def split_cuboid(cuboid: Cuboid, dim: int, mode: SplitMode, coords=None):
    """Bisect ``cuboid`` along ``dim``.

    Returns ``(left, right, threshold)``; ``left`` covers ``[l, t)`` and
    ``right`` covers ``[t, u]`` in ``dim``.
    """
    lo = float(cuboid.lower[dim])
    hi = float(cuboid.upper[dim])
    if SplitMode(mode) is SplitMode.SIZE:
        thr = 0.5 * (lo + hi)
        if not lo < thr < hi:
            raise UnsplittableInterval(f"interval [{lo!r}, {hi!r}] is too narrow to bisect")
    else:
        if coords is None:
            raise ValueError("score split needs the element's coordinates")
        thr = score_threshold(coords, lo, hi)
    left_upper = cuboid.upper.copy()
    left_upper[dim] = thr
    right_lower = cuboid.lower.copy()
    right_lower[dim] = thr
    return Cuboid(cuboid.lower, left_upper), Cuboid(right_lower, cuboid.upper), thr


def linear_inverse_cdf(u, theta):
    """Invert ``F(z) = z + theta/2 (z^2 - z)`` on ``[0, 1]`` without cancellation."""
    u = np.asarray(u, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    b = 1.0 - 0.5 * theta
    disc = np.maximum(b * b + 2.0 * theta * u, 0.0)
    denom = b + np.sqrt(disc)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(denom > 0.0, 2.0 * u / denom, 0.0)
    return np.clip(z, 0.0, 1.0)


def _as_models(thetas, order: Order):
    if Order(order) is Order.CONSTANT:
        return tuple(MarginalModel.constant() for _ in thetas)
    return tuple(MarginalModel.linear(float(t)) for t in thetas)


def make_element(lower, upper, thetas, order, count, n_total, closed_upper=None):
    return DistributionElement(Cuboid(lower, upper), _as_models(thetas, order), int(count),
                               int(n_total), closed_upper)

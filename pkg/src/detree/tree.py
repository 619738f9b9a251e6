"""Distribution element trees: construction, queries, sampling.

A tree is stored as flat pre-order node arrays.  Interim nodes carry a split
dimension and threshold; leaves carry per-dimension slopes and a sample
count.  Leaf cuboids are derived from the split records, so a tree is fully
described by ``(bounds, nodes)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from .elements import (
    DistributionElement,
    MarginalModel,
    Order,
    SplitMode,
    linear_inverse_cdf,
    make_element,
    mmse_slopes,
    score_threshold,
)
from .ensemble import (
    DomainBounds,
    SampleEnsemble,
    WhitenTransform,
    apply_unwhiten,
    apply_whiten,
    compute_bounds,
    fit_whiten,
)
from .errors import UnsplittableInterval
from .stat_tests import (
    GofStatistic,
    IndepStatistic,
    SignificanceConfig,
    TestOutcome,
    contingency_chi2,
    gof_test,
    independence_classes,
    kendall_tau_independence,
    mann_wald_class_count,
)

log = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 60


@dataclass(frozen=True)
class BuildConfig:
    order: Order = Order.LINEAR
    split_mode: SplitMode = SplitMode.SIZE
    significance: SignificanceConfig = field(default_factory=SignificanceConfig)
    max_depth: int = DEFAULT_MAX_DEPTH

    def __post_init__(self):
        object.__setattr__(self, "order", Order(self.order))
        object.__setattr__(self, "split_mode", SplitMode(self.split_mode))
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    @classmethod
    def make(cls, order="linear", split="size", alpha_g=0.001, alpha_d=0.001,
             gof="chi2", indep="chi2", max_depth=DEFAULT_MAX_DEPTH):
        sig = SignificanceConfig(alpha_g, alpha_d, GofStatistic(gof), IndepStatistic(indep))
        return cls(Order(order), SplitMode(split), sig, max_depth)

    def to_dict(self) -> dict:
        s = self.significance
        return {
            "order": self.order.value,
            "split_mode": self.split_mode.value,
            "alpha_g": s.alpha_g,
            "alpha_d": s.alpha_d,
            "gof_statistic": s.gof_statistic.value,
            "indep_statistic": s.indep_statistic.value,
            "max_depth": self.max_depth,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BuildConfig":
        return cls.make(data["order"], data["split_mode"], data["alpha_g"], data["alpha_d"],
                        data["gof_statistic"], data["indep_statistic"], data["max_depth"])


# -- decisions -------------------------------------------------------------


class Final(NamedTuple):
    pass


class SplitOne(NamedTuple):
    dim: int


class SplitTwo(NamedTuple):
    dim_first: int
    dim_second: int


Decision = Union[Final, SplitOne, SplitTwo]


def fit_slopes(z: np.ndarray, order: Order) -> np.ndarray:
    """Per-dimension slopes for rescaled element data ``z`` (``k x d``)."""
    k, d = z.shape
    if Order(order) is Order.CONSTANT or k == 0:
        return np.zeros(d)
    mean = z.mean(axis=0)
    var = np.mean((z - mean) ** 2, axis=0)
    return mmse_slopes(mean, var, k)


def _null(order: Order, theta: float) -> MarginalModel:
    if order is Order.CONSTANT:
        return MarginalModel.constant()
    return MarginalModel.linear(theta)


def gof_pvalues(z: np.ndarray, thetas: np.ndarray, config: BuildConfig) -> list[TestOutcome]:
    sig = config.significance
    zs = np.sort(z, axis=0)
    return [gof_test(zs[:, i], _null(config.order, thetas[i]), sig.alpha_g,
                     sig.gof_statistic, assume_sorted=True) for i in range(z.shape[1])]


def independence_pvalues(z: np.ndarray, config: BuildConfig) -> dict[tuple[int, int], TestOutcome]:
    sig = config.significance
    k, d = z.shape
    out = {}
    if sig.indep_statistic is IndepStatistic.KENDALL:
        for i in range(d - 1):
            for j in range(i + 1, d):
                out[(i, j)] = kendall_tau_independence(z[:, i], z[:, j], sig.alpha_d)
        return out
    n_c = mann_wald_class_count(k, sig.alpha_g) if k else 0
    b = independence_classes(k, n_c)
    if b < 2:
        return {(i, j): TestOutcome.skipped() for i in range(d - 1) for j in range(i + 1, d)}
    order = np.argsort(z, axis=0, kind="stable")
    labels = np.empty((k, d), dtype=np.intp)
    ranks = (np.arange(k) * b) // k
    for i in range(d):
        labels[order[:, i], i] = ranks
    for i in range(d - 1):
        for j in range(i + 1, d):
            out[(i, j)] = contingency_chi2(labels[:, i], labels[:, j], b)
    return out


def decide_node(z: np.ndarray, thetas: np.ndarray, config: BuildConfig) -> Decision:
    """Test an element's data and decide whether and how to split it.

    ``z`` holds the element's samples rescaled to the unit cube.  Marginal
    goodness-of-fit comes first; only if every direction passes are the
    coordinate pairs tested for independence.  Ties in the smallest p-value
    resolve to the lowest dimension (or pair) index.
    """
    k, d = z.shape
    if k == 0:
        return Final()
    sig = config.significance
    gof = gof_pvalues(z, thetas, config)
    p_gof = np.array([t.p_value for t in gof])
    rejecting = [t.rejects(sig.alpha_g) for t in gof]
    if any(rejecting):
        p = np.where(rejecting, p_gof, np.inf)
        return SplitOne(int(np.argmin(p)))
    if d == 1:
        return Final()
    indep = independence_pvalues(z, config)
    best = None
    for pair, outcome in indep.items():
        if outcome.rejects(sig.alpha_d) and (best is None or outcome.p_value < indep[best].p_value):
            best = pair
    if best is None:
        return Final()
    i, j = best
    if p_gof[j] < p_gof[i]:
        i, j = j, i
    return SplitTwo(i, j)


# -- tree structure --------------------------------------------------------


@dataclass
class NodeTable:
    """Pre-order node arrays; leaves have ``split_dim == -1``."""

    split_dim: np.ndarray
    threshold: np.ndarray
    count: np.ndarray
    thetas: np.ndarray

    def __len__(self):
        return self.split_dim.size


@dataclass(frozen=True)
class Interim:
    split_dim: int
    threshold: float
    left: int
    right: int
    count: int


@dataclass(frozen=True)
class Leaf:
    element: DistributionElement
    depth: int


@dataclass
class TreeStats:
    m: int
    n_t: int
    node_count: int
    max_depth_hits: int = 0
    unsplittable: int = 0


class DetTree:
    """A fitted distribution element tree."""

    def __init__(self, bounds: DomainBounds, config: BuildConfig, n_total: int, nodes: NodeTable,
                 whiten: Optional[WhitenTransform] = None, warnings: Optional[dict] = None):
        self.bounds = bounds
        self.config = config
        self.n_total = int(n_total)
        self.nodes = nodes
        self.whiten = whiten
        self._index_tree()
        w = warnings or {}
        self.stats = TreeStats(
            m=int(self.leaf_nodes.size),
            n_t=int(self.leaf_depth.max()) if self.leaf_depth.size else 0,
            node_count=len(nodes),
            max_depth_hits=int(w.get("max_depth", 0)),
            unsplittable=int(w.get("unsplittable", 0)),
        )

    @property
    def d(self) -> int:
        return self.bounds.d

    def _index_tree(self):
        nodes = self.nodes
        n_nodes = len(nodes)
        d = self.bounds.d
        left = np.full(n_nodes, -1, dtype=np.intp)
        right = np.full(n_nodes, -1, dtype=np.intp)
        leaf_of = np.full(n_nodes, -1, dtype=np.intp)
        lowers, uppers, depths, leaves = [], [], [], []
        # linear scan over pre-order; the stack holds interim nodes awaiting a right child
        stack = []
        lower = self.bounds.lower.copy()
        upper = self.bounds.upper.copy()
        cur = (lower, upper, 0)
        for i in range(n_nodes):
            lo, hi, depth = cur
            dim = int(nodes.split_dim[i])
            if dim >= 0:
                thr = float(nodes.threshold[i])
                left_hi = hi.copy()
                left_hi[dim] = thr
                right_lo = lo.copy()
                right_lo[dim] = thr
                left[i] = i + 1
                stack.append((i, right_lo, hi, depth + 1))
                cur = (lo, left_hi, depth + 1)
            else:
                leaf_of[i] = len(leaves)
                leaves.append(i)
                lowers.append(lo)
                uppers.append(hi)
                depths.append(depth)
                if stack:
                    parent, rlo, rhi, rdepth = stack.pop()
                    if i + 1 < n_nodes:
                        right[parent] = i + 1
                    cur = (rlo, rhi, rdepth)
        self.left = left
        self.right = right
        self.leaf_of = leaf_of
        self.leaf_nodes = np.array(leaves, dtype=np.intp)
        self.leaf_lower = np.array(lowers).reshape(-1, d)
        self.leaf_upper = np.array(uppers).reshape(-1, d)
        self.leaf_depth = np.array(depths, dtype=np.intp)
        self.leaf_count = nodes.count[self.leaf_nodes].astype(np.int64)
        self.leaf_thetas = nodes.thetas[self.leaf_nodes].reshape(-1, d)
        self.leaf_weight = self.leaf_count / self.n_total if self.n_total else np.zeros(len(leaves))

    # -- structural views ----------------------------------------------------

    def node(self, i: int) -> Union[Interim, Leaf]:
        if self.nodes.split_dim[i] >= 0:
            return Interim(int(self.nodes.split_dim[i]), float(self.nodes.threshold[i]),
                           int(self.left[i]), int(self.right[i]), int(self.nodes.count[i]))
        return Leaf(self.element(int(self.leaf_of[i])), int(self.leaf_depth[self.leaf_of[i]]))

    def element(self, k: int) -> DistributionElement:
        closed = self.leaf_upper[k] == self.bounds.upper
        return make_element(self.leaf_lower[k], self.leaf_upper[k], self.leaf_thetas[k],
                            self.config.order, self.leaf_count[k], self.n_total, closed)

    def leaves(self):
        for k in range(self.stats.m):
            yield self.element(k)

    # -- evaluation ----------------------------------------------------------

    def locate(self, points) -> np.ndarray:
        """Leaf index for each point in the tree's own coordinates, ``-1`` outside the domain."""
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        n = x.shape[0]
        inside = self.bounds.contains(x)
        node = np.zeros(n, dtype=np.intp)
        dims = self.nodes.split_dim
        thr = self.nodes.threshold
        active = np.nonzero(inside & (dims[node] >= 0))[0]
        while active.size:
            cur = node[active]
            go_left = x[active, dims[cur]] < thr[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[dims[node[active]] >= 0]
        out = self.leaf_of[node]
        out[~inside] = -1
        return out

    def _density_local(self, x: np.ndarray) -> np.ndarray:
        leaf = self.locate(x)
        dens = np.zeros(x.shape[0])
        ok = leaf >= 0
        k = leaf[ok]
        lo = self.leaf_lower[k]
        width = self.leaf_upper[k] - lo
        z = (x[ok] - lo) / width
        vals = ((z - 0.5) * self.leaf_thetas[k] + 1.0) / width
        dens[ok] = self.leaf_weight[k] * np.prod(vals, axis=1)
        return dens

    def density(self, points) -> np.ndarray:
        """Density estimate at each row of ``points`` (original coordinates)."""
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if x.shape[1] != self.d:
            raise ValueError(f"points have {x.shape[1]} columns, tree has d={self.d}")
        if self.whiten is None:
            return self._density_local(x)
        y = apply_whiten(self.whiten, x)
        return self._density_local(y) * np.exp(self.whiten.log_abs_det)

    __call__ = density

    def brute_force_density(self, points) -> np.ndarray:
        """Sum of every leaf's density, without using the tree structure."""
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.whiten is not None:
            scale = np.exp(self.whiten.log_abs_det)
            x = apply_whiten(self.whiten, x)
        else:
            scale = 1.0
        total = np.zeros(x.shape[0])
        for de in self.leaves():
            total += np.atleast_1d(element_density_rows(de, x))
        return total * scale

    def integrate(self) -> float:
        return math.fsum(de.integral() for de in self.leaves())

    def leaf_volumes(self) -> np.ndarray:
        return np.prod(self.leaf_upper - self.leaf_lower, axis=1)

    def __repr__(self):
        s = self.stats
        return f"DetTree(n={self.n_total}, d={self.d}, m={s.m}, depth={s.n_t})"


def element_density_rows(de: DistributionElement, x: np.ndarray) -> np.ndarray:
    inside = de.cuboid.contains(x, de.closed_upper)
    z = (x - de.cuboid.lower) / de.cuboid.widths
    vals = ((z - 0.5) * de.thetas + 1.0) / de.cuboid.widths
    return np.where(inside, de.weight * np.prod(vals, axis=1), 0.0)


# -- construction ----------------------------------------------------------


class _Builder:
    def __init__(self, x: np.ndarray, bounds: DomainBounds, config: BuildConfig):
        self.x = x
        self.bounds = bounds
        self.config = config
        self.d = x.shape[1]
        self.split_dim: list[int] = []
        self.threshold: list[float] = []
        self.count: list[int] = []
        self.thetas: list[np.ndarray] = []
        self.warnings = {"max_depth": 0, "unsplittable": 0}

    def _emit(self, dim, thr, count, thetas):
        self.split_dim.append(dim)
        self.threshold.append(thr)
        self.count.append(count)
        self.thetas.append(thetas)

    def _leaf(self, count, thetas):
        self._emit(-1, np.nan, count, thetas)

    def _threshold(self, idx, lo, hi, dim):
        lo_d = float(lo[dim])
        hi_d = float(hi[dim])
        if self.config.split_mode is SplitMode.SIZE:
            thr = 0.5 * (lo_d + hi_d)
            if not lo_d < thr < hi_d:
                raise UnsplittableInterval(f"interval [{lo_d!r}, {hi_d!r}] too narrow")
            return thr
        return score_threshold(self.x[idx, dim], lo_d, hi_d)

    def _halves(self, idx, lo, hi, dim, thr):
        below = self.x[idx, dim] < thr
        left_hi = hi.copy()
        left_hi[dim] = thr
        right_lo = lo.copy()
        right_lo[dim] = thr
        return (idx[below], lo, left_hi), (idx[~below], right_lo, hi)

    def grow(self, idx, lo, hi, depth):
        k = idx.size
        if k == 0:
            self._leaf(0, np.zeros(self.d))
            return
        z = (self.x[idx] - lo) / (hi - lo)
        thetas = fit_slopes(z, self.config.order)
        if depth >= self.config.max_depth:
            self.warnings["max_depth"] += 1
            self._leaf(k, thetas)
            return
        decision = decide_node(z, thetas, self.config)
        if isinstance(decision, Final):
            self._leaf(k, thetas)
            return
        if isinstance(decision, SplitOne):
            dims = (decision.dim,)
        else:
            dims = (decision.dim_first, decision.dim_second)
        first = None
        for dim in dims:
            try:
                first = (dim, self._threshold(idx, lo, hi, dim))
                break
            except UnsplittableInterval:
                self.warnings["unsplittable"] += 1
        if first is None:
            self._leaf(k, thetas)
            return
        dim, thr = first
        second = dims[1] if len(dims) == 2 and dims[0] == dim else None
        self._emit(dim, thr, k, np.zeros(self.d))
        for child in self._halves(idx, lo, hi, dim, thr):
            if second is None or depth + 1 >= self.config.max_depth:
                self.grow(*child, depth + 1)
            else:
                self._grow_split(child, second, depth + 1)

    def _grow_split(self, child, dim, depth):
        # second direction of a pair split, threshold chosen from the child's own samples
        idx, lo, hi = child
        try:
            if idx.size < 2 and self.config.split_mode is SplitMode.SCORE:
                raise UnsplittableInterval("too few samples")
            thr = self._threshold(idx, lo, hi, dim)
        except UnsplittableInterval:
            self.grow(idx, lo, hi, depth)
            return
        self._emit(dim, thr, idx.size, np.zeros(self.d))
        for grand in self._halves(idx, lo, hi, dim, thr):
            self.grow(*grand, depth + 1)

    def table(self) -> NodeTable:
        return NodeTable(
            np.array(self.split_dim, dtype=np.intp),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.count, dtype=np.int64),
            np.array(self.thetas, dtype=np.float64).reshape(-1, self.d),
        )


def build(ensemble, config: Optional[BuildConfig] = None, bounds: Optional[DomainBounds] = None,
          whiten: bool = False) -> DetTree:
    """Fit a distribution element tree to an ensemble.

    Parameters
    ----------
    ensemble : SampleEnsemble or array-like, shape (n, d)
    config : BuildConfig, optional
        Defaults to linear elements, equal-size splits and chi-squared tests
        at significance 0.001.
    bounds : DomainBounds, optional
        Root cuboid; defaults to the componentwise sample range.
    whiten : bool
        Fit in principal-axes coordinates and map densities back.
    """
    if not isinstance(ensemble, SampleEnsemble):
        ensemble = SampleEnsemble(ensemble)
    config = config or BuildConfig()
    transform = None
    x = ensemble.values
    if whiten:
        transform = fit_whiten(ensemble)
        x = apply_whiten(transform, x)
        if bounds is None:
            bounds = compute_bounds(SampleEnsemble(x))
    elif bounds is None:
        bounds = compute_bounds(ensemble)
    if bounds.d != x.shape[1]:
        raise ValueError("bounds dimension does not match samples")
    if not np.all(bounds.contains(x)):
        raise ValueError("samples fall outside the domain bounds")
    builder = _Builder(np.ascontiguousarray(x), bounds, config)
    builder.grow(np.arange(x.shape[0], dtype=np.intp), bounds.lower.copy(), bounds.upper.copy(), 0)
    w = builder.warnings
    if w["max_depth"] or w["unsplittable"]:
        log.warning("tree built with %d max-depth stops and %d unsplittable nodes",
                    w["max_depth"], w["unsplittable"])
    return DetTree(bounds, config, x.shape[0], builder.table(), transform, w)


def query_density(tree: DetTree, x) -> np.ndarray | float:
    """Density at one point (returns float) or at each row of an array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim <= 1 and tree.d > 1 or arr.ndim == 0:
        return float(tree.density(arr.reshape(1, -1))[0])
    if arr.ndim == 1 and tree.d == 1:
        return tree.density(arr.reshape(-1, 1))
    return tree.density(arr)


def integrate(tree: DetTree) -> float:
    return tree.integrate()


def draw_samples(tree: DetTree, count: int, seed=None) -> np.ndarray:
    """Draw ``count`` samples from the fitted density.

    A leaf is picked with probability equal to its weight, then each
    coordinate is drawn by inverting its marginal CDF.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if tree.n_total == 0:
        raise ValueError("tree holds no samples")
    rng = np.random.default_rng(seed)
    d = tree.d
    if count == 0:
        return np.empty((0, d))
    probs = tree.leaf_count / tree.leaf_count.sum()
    k = rng.choice(probs.size, size=count, p=probs)
    u = rng.random((count, d))
    z = linear_inverse_cdf(u, tree.leaf_thetas[k])
    lo = tree.leaf_lower[k]
    out = lo + z * (tree.leaf_upper[k] - lo)
    if tree.whiten is not None:
        out = apply_unwhiten(tree.whiten, out)
    return out

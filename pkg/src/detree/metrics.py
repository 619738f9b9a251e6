"""Error metrics and the benchmark sweep engine.

Integrated squared error (ISE) is measured either by trapezoidal
quadrature on a grid or by the Monte Carlo identity

    ISE = E_p[ p_hat^2 / p - 2 p_hat + p ],

which only needs draws from the true density ``p``.  A sweep averages ISE
over independent ensembles to estimate the MISE.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DetError, DivisionByZeroDensity
from .quadrature import GridSpec, MonteCarloSpec, StretchedGridSpec, grid_rule
from .refdist import ReferenceCase, get_case, histogram_fit
from .tree import BuildConfig, build

log = logging.getLogger(__name__)

Density = Callable[[np.ndarray], np.ndarray]

CSV_HEADER = ("case", "estimator", "n", "repeats", "mise", "mise_stderr", "mean_m",
              "mean_depth", "fit_seconds", "query_seconds")


def _eval(f: Density, points: np.ndarray) -> np.ndarray:
    return np.asarray(f(points), dtype=np.float64).ravel()


class GridIntegrator:
    """Trapezoidal integrals against a fixed truth on a precomputed grid."""

    def __init__(self, truth: Density, lower, upper, spec=GridSpec()):
        self.rule = grid_rule(lower, upper, spec)
        self.truth = _eval(truth, self.rule.points)

    def ise(self, estimate: Density) -> tuple[float, float]:
        diff = _eval(estimate, self.rule.points) - self.truth
        return self.rule.integrate(diff * diff), 0.0

    def hellinger(self, estimate: Density) -> float:
        q = np.maximum(_eval(estimate, self.rule.points), 0.0)
        r = np.sqrt(q) - np.sqrt(self.truth)
        return math.sqrt(max(0.0, 0.5 * self.rule.integrate(r * r)))

    def total_variation(self, estimate: Density) -> float:
        q = _eval(estimate, self.rule.points)
        return 0.5 * self.rule.integrate(np.abs(q - self.truth))


class MonteCarloIntegrator:
    """ISE from draws of the true density."""

    def __init__(self, truth: Density, samples: np.ndarray):
        self.samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        self.truth = _eval(truth, self.samples)
        if np.any(self.truth <= 0.0):
            bad = int(np.argmax(self.truth <= 0.0))
            raise DivisionByZeroDensity(f"true density vanishes at sample {bad}")

    def ise(self, estimate: Density) -> tuple[float, float]:
        q = _eval(estimate, self.samples)
        p = self.truth
        terms = q * q / p - 2.0 * q + p
        k = terms.size
        stderr = float(terms.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        return float(terms.mean()), stderr


def ise_grid(estimate: Density, truth: Density, bounds, spec=GridSpec()) -> float:
    """Trapezoidal ``integral (p_hat - p)^2`` over the box ``bounds = (lower, upper)``."""
    lower, upper = _box(bounds)
    return GridIntegrator(truth, lower, upper, spec).ise(estimate)[0]


def ise_mc(estimate: Density, truth: Density, samples, return_stderr: bool = False):
    """Monte Carlo ISE from samples of the true density."""
    value, stderr = MonteCarloIntegrator(truth, samples).ise(estimate)
    return (value, stderr) if return_stderr else value


def hellinger(estimate: Density, truth: Density, bounds, spec=GridSpec()) -> float:
    lower, upper = _box(bounds)
    return GridIntegrator(truth, lower, upper, spec).hellinger(estimate)


def total_variation(estimate: Density, truth: Density, bounds, spec=GridSpec()) -> float:
    lower, upper = _box(bounds)
    return GridIntegrator(truth, lower, upper, spec).total_variation(estimate)


def _box(bounds):
    if hasattr(bounds, "lower") and hasattr(bounds, "upper"):
        return bounds.lower, bounds.upper
    lower, upper = bounds
    return lower, upper


def make_integrator(case: ReferenceCase):
    spec = case.integration
    if isinstance(spec, MonteCarloSpec):
        ss = np.random.SeedSequence(spec.seed, spawn_key=(zlib.crc32(case.name.encode()),))
        return MonteCarloIntegrator(case.pdf, case.sample_array(spec.draws, ss))
    if isinstance(spec, (GridSpec, StretchedGridSpec)):
        lower, upper = case.integration_box()
        return GridIntegrator(case.pdf, lower, upper, spec)
    raise TypeError(f"unknown integration spec {spec!r}")


# -- sweeps ----------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str = "det"
    config: BuildConfig = field(default_factory=BuildConfig)
    whiten: bool = False

    def __post_init__(self):
        if self.kind not in ("det", "histogram"):
            raise ValueError(f"unknown estimator {self.kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "histogram":
            return "histogram"
        c = self.config
        parts = ["det", c.order.value, c.split_mode.value]
        if self.whiten:
            parts.append("whiten")
        return "-".join(parts)

    def fit(self, ensemble):
        """Returns ``(density, m, depth)``."""
        if self.kind == "histogram":
            h = histogram_fit(ensemble)
            return h.density, int(h.codes.size), 0
        tree = build(ensemble, self.config, whiten=self.whiten)
        return tree.density, tree.stats.m, tree.stats.n_t


@dataclass(frozen=True)
class SweepRecord:
    case: str
    estimator: str
    n: int
    repeats: int
    mise: float
    mise_stderr: float
    mean_m: float
    mean_depth: float
    # wall-clock fields do not take part in equality
    fit_seconds: float = field(compare=False)
    query_seconds: float = field(compare=False)
    failed: int = 0
    ise: tuple = field(default=(), compare=False, repr=False)


def repeat_seed(seed: int, case: str, n: int, rep: int) -> np.random.SeedSequence:
    """Seed for one repeat, independent of scheduling order."""
    return np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(case.encode()), int(n), int(rep)))


def run_sweep(case, estimator: Optional[EstimatorSpec] = None, n_list: Sequence[int] = (100, 1000),
              repeats: int = 20, seed: int = 0, integrator=None) -> list[SweepRecord]:
    """Estimate the MISE of ``estimator`` on ``case`` for every ``n`` in ``n_list``.

    Each repeat draws a fresh ensemble from a seed derived from
    ``(seed, case, n, repeat)``, fits, and integrates the squared error with
    the case's integration rule.  Repeats whose fit raises are skipped and
    counted in ``failed``.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if isinstance(case, str):
        case = get_case(case)
    estimator = estimator or EstimatorSpec()
    integrator = integrator or make_integrator(case)
    records = []
    for n in n_list:
        ises, ms, depths, fit_t, query_t = [], [], [], [], []
        failed = 0
        for rep in range(repeats):
            ens = case.sample(int(n), repeat_seed(seed, case.name, n, rep))
            t0 = time.perf_counter()
            try:
                density, m, depth = estimator.fit(ens)
            except (DetError, ValueError, np.linalg.LinAlgError) as exc:
                failed += 1
                log.warning("case %s n=%d repeat %d failed: %s", case.name, n, rep, exc)
                continue
            t1 = time.perf_counter()
            value, _ = integrator.ise(density)
            t2 = time.perf_counter()
            ises.append(value)
            ms.append(m)
            depths.append(depth)
            fit_t.append(t1 - t0)
            query_t.append(t2 - t1)
        k = len(ises)
        if k == 0:
            records.append(SweepRecord(case.name, estimator.label, int(n), 0, math.nan, math.nan,
                                       math.nan, math.nan, math.nan, math.nan, failed))
            continue
        arr = np.array(ises)
        stderr = float(arr.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        records.append(SweepRecord(case.name, estimator.label, int(n), k, float(arr.mean()), stderr,
                                   float(np.mean(ms)), float(np.mean(depths)),
                                   float(np.mean(fit_t)), float(np.mean(query_t)), failed,
                                   tuple(ises)))
    return records


def format_sweep_csv(records: Iterable[SweepRecord], timing: bool = True) -> str:
    """Sweep records as CSV; with ``timing=False`` the time columns are 0 so output is reproducible."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        fit_s = r.fit_seconds if timing else 0.0
        query_s = r.query_seconds if timing else 0.0
        w.writerow([r.case, r.estimator, r.n, r.repeats] +
                   [f"{v:.17g}" for v in (r.mise, r.mise_stderr, r.mean_m, r.mean_depth,
                                          fit_s, query_s)])
    return buf.getvalue()


def loglog_slope(n, values) -> float:
    """Least-squares slope of ``log10(values)`` against ``log10(n)``."""
    x = np.log10(np.asarray(n, dtype=np.float64))
    y = np.log10(np.asarray(values, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def linear_fit_r2(x, y) -> float:
    """Coefficient of determination of the least-squares line through ``(x, y)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if float(np.sum(resid ** 2)) == 0.0 else 0.0
    return 1.0 - float(np.sum(resid ** 2)) / ss_tot

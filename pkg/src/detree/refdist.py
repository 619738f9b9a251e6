"""Reference distributions with exact densities and samplers, plus a histogram baseline.

Every case bundles a density, an exact sampler and the rule used to
integrate estimator errors against it.  Normal components are
parameterized by standard deviation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ensemble import DomainBounds, SampleEnsemble, compute_bounds
from .errors import DegenerateDimension, UnknownCase
from .quadrature import GridSpec, MonteCarloSpec, StretchedGridSpec

TWO_PI = 2.0 * math.pi


def _normal_pdf(x, mu, sigma):
    u = (x - mu) / sigma
    return np.exp(-0.5 * u * u) / (sigma * math.sqrt(TWO_PI))


@dataclass(frozen=True)
class NormalMixture:
    weights: tuple
    means: tuple
    sigmas: tuple

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)[..., 0]
        out = np.zeros(x.shape)
        for w, mu, s in zip(self.weights, self.means, self.sigmas):
            out += w * _normal_pdf(x, mu, s)
        return out

    def sample(self, count, rng):
        comp = rng.choice(len(self.weights), size=count, p=np.array(self.weights))
        mu = np.array(self.means)[comp]
        sd = np.array(self.sigmas)[comp]
        return (mu + sd * rng.standard_normal(count))[:, None]


@dataclass(frozen=True)
class UniformMixture:
    weights: tuple
    intervals: tuple

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)[..., 0]
        out = np.zeros(x.shape)
        for w, (a, b) in zip(self.weights, self.intervals):
            out += np.where((x >= a) & (x <= b), w / (b - a), 0.0)
        return out

    def sample(self, count, rng):
        comp = rng.choice(len(self.weights), size=count, p=np.array(self.weights))
        iv = np.array(self.intervals)[comp]
        return (iv[:, 0] + rng.random(count) * (iv[:, 1] - iv[:, 0]))[:, None]


@dataclass(frozen=True)
class Dirichlet:
    """Dirichlet law on the first ``len(alpha) - 1`` simplex coordinates (beta when d=1).

    The density is reported as 0 on the boundary, including where a
    parameter below one makes it singular.
    """

    alpha: tuple

    @property
    def d(self):
        return len(self.alpha) - 1

    def log_norm(self) -> float:
        a = self.alpha
        return math.lgamma(sum(a)) - sum(math.lgamma(v) for v in a)

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        a = np.asarray(self.alpha)
        rest = 1.0 - x.sum(axis=-1)
        inside = np.all(x > 0.0, axis=-1) & (rest > 0.0)
        safe_x = np.where(inside[..., None], x, 0.5)
        safe_rest = np.where(inside, rest, 0.5)
        logp = self.log_norm() + np.sum((a[:-1] - 1.0) * np.log(safe_x), axis=-1)
        logp += (a[-1] - 1.0) * np.log(safe_rest)
        return np.where(inside, np.exp(logp), 0.0)

    def sample(self, count, rng):
        g = rng.gamma(np.asarray(self.alpha), size=(count, len(self.alpha)))
        return (g / g.sum(axis=1, keepdims=True))[:, :-1]


@dataclass(frozen=True)
class Gamma:
    shape: float
    scale: float

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)[..., 0]
        a, b = self.shape, self.scale
        pos = x > 0.0
        safe = np.where(pos, x, 1.0)
        logp = (a - 1.0) * np.log(safe) - safe / b - a * math.log(b) - math.lgamma(a)
        return np.where(pos, np.exp(logp), 0.0)

    def sample(self, count, rng):
        return rng.gamma(self.shape, self.scale, size=count)[:, None]


@dataclass(frozen=True)
class Gaussian:
    cov: np.ndarray = field(compare=False)

    def __post_init__(self):
        c = np.array(self.cov, dtype=np.float64)
        object.__setattr__(self, "cov", c)
        object.__setattr__(self, "_chol", np.linalg.cholesky(c))
        object.__setattr__(self, "_prec", np.linalg.inv(c))
        _, logdet = np.linalg.slogdet(c)
        object.__setattr__(self, "_log_norm", -0.5 * (c.shape[0] * math.log(TWO_PI) + logdet))

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        q = np.einsum("...i,ij,...j->...", x, self._prec, x)
        return np.exp(self._log_norm - 0.5 * q)

    def sample(self, count, rng):
        z = rng.standard_normal((count, self.cov.shape[0]))
        return z @ self._chol.T


@dataclass(frozen=True)
class Ellipse:
    """Uniform density ``1/pi`` on ``x1^2 + (4 x2)^2 <= 4``."""

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        inside = x[..., 0] ** 2 + (4.0 * x[..., 1]) ** 2 <= 4.0
        return np.where(inside, 1.0 / math.pi, 0.0)

    def sample(self, count, rng):
        out = np.empty((0, 2))
        while out.shape[0] < count:
            # acceptance rate is pi/4, so draw generously
            m = int(1.3 * (count - out.shape[0])) + 16
            box = np.column_stack([rng.uniform(-2.0, 2.0, m), rng.uniform(-0.5, 0.5, m)])
            keep = box[:, 0] ** 2 + (4.0 * box[:, 1]) ** 2 <= 4.0
            out = np.vstack([out, box[keep]])
        return out[:count]


def rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class ReferenceCase:
    """A named test distribution.

    ``box`` is the integration region used by grid rules; it covers the
    support (or all but a negligible tail of it).  ``rotate`` applies a
    fixed rotation of the plane by ``pi/4`` to the samples and the density.
    """

    name: str
    d: int
    law: object
    integration: object
    box: Optional[tuple] = None
    rotate: bool = False

    def _rot(self):
        return rotation(math.pi / 4.0)

    def pdf(self, points) -> np.ndarray:
        x = np.asarray(points, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, self.d) if self.d > 1 else x[:, None]
        if x.shape[-1] != self.d:
            raise ValueError(f"case {self.name!r} has d={self.d}, points have {x.shape[-1]} columns")
        if self.rotate:
            x = x @ self._rot()  # R^T applied to each row
        return self.law.pdf(x)

    def sample(self, count: int, seed=None) -> SampleEnsemble:
        return SampleEnsemble(self.sample_array(count, seed))

    def sample_array(self, count: int, seed=None) -> np.ndarray:
        if count < 1:
            raise ValueError("count must be >= 1")
        rng = np.random.default_rng(seed)
        x = self.law.sample(int(count), rng)
        if self.rotate:
            x = x @ self._rot().T
        return x

    def integration_box(self):
        lo, hi = (np.asarray(b, dtype=np.float64) for b in self.box)
        if not self.rotate:
            return lo, hi
        corners = np.array([[a, b] for a in (lo[0], hi[0]) for b in (lo[1], hi[1])])
        rc = corners @ self._rot().T
        return rc.min(axis=0), rc.max(axis=0)

    def rotated(self) -> "ReferenceCase":
        if self.d != 2:
            raise ValueError("rotation is defined for 2-d cases only")
        return ReferenceCase(self.name, self.d, self.law, self.integration, self.box, True)


COV_2D = ((4.0, -2.28), (-2.28, 1.44))

COV_4D = (
    (1.0, -0.344, 0.141, -0.486),
    (-0.344, 1.0, 0.586, 0.244),
    (0.141, 0.586, 1.0, -0.544),
    (-0.486, 0.244, -0.544, 1.0),
)

COV_7D = (
    (1.0, -0.216, 0.161, -0.0496, 0.0342, -0.116, 0.749),
    (-0.216, 1.0, 0.301, 0.0391, -0.217, 0.0189, -0.381),
    (0.161, 0.301, 1.0, 0.574, -0.312, 0.109, 0.386),
    (-0.0496, 0.0391, 0.574, 1.0, -0.438, 0.730, -0.0572),
    (0.0342, -0.217, -0.312, -0.438, 1.0, -0.475, 0.258),
    (-0.116, 0.0189, 0.109, 0.730, -0.475, 1.0, -0.386),
    (0.749, -0.381, 0.386, -0.0572, 0.258, -0.386, 1.0),
)

ALPHA_2D = (0.9, 1.5, 3.0)
ALPHA_4D = (6.13, 9.29, 10.6, 8.24, 3.91)
ALPHA_7D = (9.0, 5.71, 8.96, 4.51, 5.81, 4.06, 10.7, 1.51)


def _claw() -> NormalMixture:
    ls = range(-2, 3)
    return NormalMixture(
        (0.5,) + tuple(2.0 ** (1 - l) / 31.0 for l in ls),
        (0.0,) + tuple(l + 0.5 for l in ls),
        (1.0,) + tuple(2.0 ** (-l) / 10.0 for l in ls),
    )


def _registry() -> dict:
    grid1 = GridSpec(2 ** 14)
    grid2 = GridSpec(2 ** 10)
    mc = MonteCarloSpec(100_000, 0)
    cases = [
        ReferenceCase("kurtotic", 1, NormalMixture((2 / 3, 1 / 3), (0.0, 0.0), (1.0, 0.1)),
                      grid1, ((-6.0,), (6.0,))),
        ReferenceCase("outlier", 1, NormalMixture((0.1, 0.9), (0.0, 0.0), (1.0, 0.1)),
                      grid1, ((-6.0,), (6.0,))),
        ReferenceCase("claw", 1, _claw(), grid1, ((-6.0,), (6.0,))),
        # jumps in the truth need a finer grid than the smooth cases
        ReferenceCase("spiky", 1, UniformMixture((0.5, 0.5), ((0.23, 0.232), (0.233, 0.235))),
                      GridSpec(2 ** 18), ((0.23,), (0.235,))),
        # singular at x = 1: log-spaced nodes refined towards the upper end
        ReferenceCase("beta", 1, Dirichlet((1.05, 0.8)), StretchedGridSpec(2 ** 16, mirror=True),
                      ((1e-12,), (1.0,))),
        # singular at x = 0 with a long right tail
        ReferenceCase("gamma", 1, Gamma(2.0 / 3.0, 50.0), StretchedGridSpec(2 ** 16),
                      ((1e-12,), (800.0,))),
        ReferenceCase("gauss2d", 2, Gaussian(COV_2D), grid2, ((-10.0, -6.0), (10.0, 6.0))),
        ReferenceCase("ellipse", 2, Ellipse(), grid2, ((-2.0, -0.5), (2.0, 0.5))),
        ReferenceCase("dirichlet2d", 2, Dirichlet(ALPHA_2D), grid2, ((0.0, 0.0), (1.0, 1.0))),
        ReferenceCase("gauss4d", 4, Gaussian(COV_4D), mc),
        ReferenceCase("gauss7d", 7, Gaussian(COV_7D), mc),
        ReferenceCase("dirichlet4d", 4, Dirichlet(ALPHA_4D), mc),
        ReferenceCase("dirichlet7d", 7, Dirichlet(ALPHA_7D), mc),
    ]
    return {c.name: c for c in cases}


CASES = _registry()
CASE_NAMES = tuple(CASES)


def get_case(name: str, rotate: bool = False) -> ReferenceCase:
    try:
        case = CASES[name]
    except KeyError:
        raise UnknownCase(f"unknown case {name!r}; known cases: {', '.join(CASES)}") from None
    return case.rotated() if rotate else case


def case_pdf(name: str, x) -> np.ndarray:
    return get_case(name).pdf(x)


def case_sample(name: str, count: int, seed=None) -> SampleEnsemble:
    return get_case(name).sample(count, seed)


# -- histogram baseline ----------------------------------------------------


def normal_reference_width(sigma, n: int, d: int):
    """Bin width ``3.5 sigma n^(-1/(d+2))``."""
    return 3.5 * np.asarray(sigma, dtype=np.float64) * float(n) ** (-1.0 / (d + 2))


@dataclass(frozen=True)
class HistogramEstimator:
    """Sparse regular histogram anchored at the lower domain corner.

    Bin widths follow the normal reference rule.  The last bin in each
    dimension may stick out past the domain, where the density is 0, so
    the integral over the domain can fall slightly short of 1.
    """

    origin: np.ndarray
    upper: np.ndarray
    bin_widths: np.ndarray
    nbins: np.ndarray
    codes: np.ndarray
    counts: np.ndarray
    n: int

    @property
    def d(self) -> int:
        return self.origin.size

    def _codes(self, x):
        idx = np.floor((x - self.origin) / self.bin_widths).astype(np.int64)
        idx = np.clip(idx, 0, self.nbins - 1)
        codes = np.zeros(x.shape[0], dtype=np.int64)
        for i in range(self.d):
            codes = codes * int(self.nbins[i]) + idx[:, i]
        return codes

    def density(self, points) -> np.ndarray:
        x = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if x.shape[1] != self.d:
            raise ValueError(f"points have {x.shape[1]} columns, histogram has d={self.d}")
        inside = np.all((x >= self.origin) & (x <= self.upper), axis=1)
        out = np.zeros(x.shape[0])
        if not inside.any():
            return out
        code = self._codes(x[inside])
        pos = np.searchsorted(self.codes, code)
        pos = np.minimum(pos, self.codes.size - 1)
        hit = self.codes[pos] == code
        vals = np.where(hit, self.counts[pos], 0).astype(np.float64)
        out[inside] = vals / (self.n * float(np.prod(self.bin_widths)))
        return out

    __call__ = density

    def integrate(self) -> float:
        return float(self.counts.sum()) / self.n


def histogram_fit(ensemble, bounds: Optional[DomainBounds] = None,
                  snap: bool = False) -> HistogramEstimator:
    """Fit a normal-reference-rule histogram.

    With ``snap`` the widths shrink to ``span / ceil(span / h)`` so a whole
    number of bins tiles the domain and the estimate integrates to 1.
    """
    if not isinstance(ensemble, SampleEnsemble):
        ensemble = SampleEnsemble(ensemble)
    x = ensemble.values
    n, d = x.shape
    if n < 2:
        raise ValueError("a histogram needs at least two samples")
    sigma = x.std(axis=0, ddof=1)
    flat = np.nonzero(sigma == 0)[0]
    if flat.size:
        raise DegenerateDimension(int(flat[0]))
    bounds = bounds or compute_bounds(ensemble)
    span = bounds.upper - bounds.lower
    h = normal_reference_width(sigma, n, d)
    if snap:
        nbins = np.maximum(1, np.ceil(span / h)).astype(np.int64)
        widths = span / nbins
    else:
        # the upper domain face lands in the last bin
        nbins = np.floor(span / h).astype(np.int64) + 1
        widths = h
    if math.prod(int(v) for v in nbins) >= 2 ** 62:
        raise ValueError("histogram has too many bins to index")
    hist = HistogramEstimator(bounds.lower, bounds.upper, widths, nbins, np.empty(0, np.int64),
                              np.empty(0, np.int64), n)
    codes, counts = np.unique(hist._codes(x), return_counts=True)
    return HistogramEstimator(bounds.lower, bounds.upper, widths, nbins, codes,
                              counts.astype(np.int64), n)


def histogram_query(h: HistogramEstimator, x) -> np.ndarray:
    return h.density(x)

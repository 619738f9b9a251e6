"""Sample storage, domain bounds, subset bookkeeping and whitening."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from os import PathLike
from typing import TextIO, Union

import numpy as np

from .errors import DataFormatError, DegenerateDimension, EmptySubset, SingularCovariance


class SampleEnsemble:
    """Immutable ``n x d`` matrix of observations.

    Row ``j`` holds sample ``j``; column ``i`` holds coordinate ``i``.
    One-dimensional input is treated as ``n`` samples of a scalar.
    """

    __slots__ = ("_values",)

    def __init__(self, values):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2:
            raise ValueError(f"samples must be a 2-d array, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("an ensemble needs at least one sample and one dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        arr.setflags(write=False)
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def d(self) -> int:
        return self._values.shape[1]

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"SampleEnsemble(n={self.n}, d={self.d})"


@dataclass(frozen=True)
class DomainBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=np.float64).ravel()
        upper = np.asarray(self.upper, dtype=np.float64).ravel()
        if lower.shape != upper.shape:
            raise ValueError("lower and upper bounds differ in length")
        bad = np.nonzero(~(lower < upper))[0]
        if bad.size:
            raise DegenerateDimension(int(bad[0]))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def d(self) -> int:
        return self.lower.size

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)


def compute_bounds(ensemble: SampleEnsemble) -> DomainBounds:
    """Componentwise sample minimum and maximum.

    These bounds are tight by construction, so densities estimated on them
    are biased slightly high near the edges.
    """
    x = ensemble.values
    lower = x.min(axis=0)
    upper = x.max(axis=0)
    flat = np.nonzero(lower == upper)[0]
    if flat.size:
        raise DegenerateDimension(int(flat[0]))
    return DomainBounds(lower, upper)


def rescaled_moments(points: np.ndarray, lower: np.ndarray, upper: np.ndarray):
    """Per-column mean and population variance after mapping ``[l, u]`` onto ``[0, 1]``."""
    z = (points - lower) / (upper - lower)
    mean = z.mean(axis=0)
    var = np.mean((z - mean) ** 2, axis=0)
    return mean, var


def conditional_moments(ensemble: SampleEnsemble, subset, dim: int, interval) -> tuple[float, float]:
    """Mean and population variance of one rescaled coordinate over a subset."""
    idx = np.asarray(subset, dtype=np.intp)
    if idx.size == 0:
        raise EmptySubset("conditional moments of an empty subset")
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"interval must satisfy l < u, got [{lo}, {hi}]")
    col = ensemble.values[idx, dim][:, None]
    mean, var = rescaled_moments(col, np.array([lo]), np.array([hi]))
    return float(mean[0]), float(var[0])


def partition_by_threshold(ensemble: SampleEnsemble, subset, dim: int, threshold: float):
    """Split ``subset`` into coordinates ``< threshold`` and ``>= threshold``.

    Input order is preserved inside each half.
    """
    idx = np.asarray(subset, dtype=np.intp)
    below = ensemble.values[idx, dim] < threshold
    return idx[below], idx[~below]


@dataclass(frozen=True)
class WhitenTransform:
    """Affine map ``y = A (x - mean)`` onto principal axes with unit variance."""

    mean: np.ndarray
    transform: np.ndarray
    inverse: np.ndarray
    log_abs_det: float

    @property
    def d(self) -> int:
        return self.mean.size

    @classmethod
    def from_arrays(cls, mean, transform):
        mean = np.asarray(mean, dtype=np.float64).ravel()
        a = np.asarray(transform, dtype=np.float64)
        try:
            inv = np.linalg.inv(a)
        except np.linalg.LinAlgError as exc:
            raise SingularCovariance(str(exc)) from exc
        _, logdet = np.linalg.slogdet(a)
        return cls(mean, a, inv, float(logdet))


def fit_whiten(ensemble: SampleEnsemble) -> WhitenTransform:
    """Principal-axes transform from the sample covariance (``ddof=1``)."""
    x = ensemble.values
    n, d = x.shape
    if n <= d:
        raise SingularCovariance(f"need more samples than dimensions (n={n}, d={d})")
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False))
    if not np.all(np.isfinite(cov)):
        raise SingularCovariance("sample covariance is not finite")
    evals, evecs = np.linalg.eigh(cov)
    # rounding can leave an exactly singular covariance slightly positive
    if not evals[0] > d * np.finfo(np.float64).eps * evals[-1]:
        raise SingularCovariance("sample covariance is not positive definite")
    # fix eigenvector signs so the transform is a deterministic function of the data
    flip = np.sign(evecs[np.argmax(np.abs(evecs), axis=0), np.arange(d)])
    evecs = evecs * flip
    transform = evecs.T / np.sqrt(evals)[:, None]
    # same derivation as deserialization so reloaded trees query bit-identically
    return WhitenTransform.from_arrays(mean, transform)


def apply_whiten(t: WhitenTransform, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return (pts - t.mean) @ t.transform.T


def apply_unwhiten(t: WhitenTransform, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return pts @ t.inverse.T + t.mean


def read_csv(source: Union[str, PathLike, TextIO]) -> SampleEnsemble:
    """Parse a headerless numeric CSV into an ensemble.

    Raises :class:`DataFormatError` naming the first offending line.
    """
    if isinstance(source, (str, PathLike)):
        with open(source, newline="") as fh:
            return read_csv(fh)
    rows = []
    width = None
    for lineno, fields in enumerate(csv.reader(source), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise DataFormatError(f"non-numeric field in {fields!r}", line=lineno) from None
        if not all(math.isfinite(v) for v in row):
            raise DataFormatError("non-finite value", line=lineno)
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise DataFormatError(f"expected {width} columns, found {len(row)}", line=lineno)
        rows.append(row)
    if not rows:
        raise DataFormatError("no samples found")
    return SampleEnsemble(np.array(rows))


def format_rows(values: np.ndarray) -> str:
    """Render rows as CSV text with 17 significant digits."""
    buf = io.StringIO()
    for row in np.atleast_2d(values):
        buf.write(",".join(f"{v:.17g}" for v in row))
        buf.write("\n")
    return buf.getvalue()

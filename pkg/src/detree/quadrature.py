"""Integration rules used to measure estimator error.

Grid-based rules integrate over an explicit box with the composite
trapezoidal rule; the Monte Carlo rule averages over draws from the true
density.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class GridSpec:
    """Equidistant Cartesian grid with ``nodes`` points per dimension."""

    nodes: int = 2 ** 14

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("a grid needs at least 2 nodes per dimension")


@dataclass(frozen=True)
class StretchedGridSpec:
    """Log-spaced 1-d grid ``x_j = l (u/l)^(j/N)``, fine near ``l``.

    With ``mirror`` the nodes are reflected as ``x -> l + u - x`` so the
    fine end sits at ``u`` instead.
    """

    nodes: int = 2 ** 14
    mirror: bool = False

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("a grid needs at least 2 nodes")


@dataclass(frozen=True)
class MonteCarloSpec:
    draws: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be >= 1")


IntegrationSpec = Union[GridSpec, StretchedGridSpec, MonteCarloSpec]


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    """Weights ``w`` with ``sum(w * f(x))`` the trapezoidal integral over sorted nodes ``x``."""
    h = np.diff(x)
    w = np.zeros(x.size)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def axis_nodes(lower: float, upper: float, spec) -> np.ndarray:
    if not lower < upper:
        raise ValueError(f"need lower < upper, got [{lower}, {upper}]")
    if isinstance(spec, StretchedGridSpec):
        if not lower > 0:
            raise DomainError(f"stretched grid needs a positive lower bound, got {lower}")
        j = np.arange(spec.nodes) / (spec.nodes - 1)
        x = lower * (upper / lower) ** j
        x[0], x[-1] = lower, upper
        if spec.mirror:
            x = (lower + upper) - x[::-1]
            x[0], x[-1] = lower, upper
        return x
    if isinstance(spec, GridSpec):
        return np.linspace(lower, upper, spec.nodes)
    raise TypeError(f"not a grid specification: {spec!r}")


@dataclass(frozen=True)
class QuadratureRule:
    """Tensor-product nodes and weights over a box."""

    points: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def grid_rule(lower, upper, spec) -> QuadratureRule:
    lower = np.atleast_1d(np.asarray(lower, dtype=np.float64))
    upper = np.atleast_1d(np.asarray(upper, dtype=np.float64))
    d = lower.size
    if isinstance(spec, StretchedGridSpec) and d != 1:
        raise ValueError("stretched grids are one-dimensional")
    if d > 2:
        raise ValueError("grid quadrature is limited to d <= 2")
    axes = [axis_nodes(float(lower[i]), float(upper[i]), spec) for i in range(d)]
    weights = [trapezoid_weights(a) for a in axes]
    if d == 1:
        return QuadratureRule(axes[0][:, None], weights[0])
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return QuadratureRule(pts, np.outer(weights[0], weights[1]).ravel())

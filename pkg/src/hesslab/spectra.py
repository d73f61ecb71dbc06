"""Spectral densities and distances between them.

A spectral density is a probe-averaged Gaussian mixture: each probe
contributes a quadrature rule (nodes x_j, weights c_j) and the density is
the average of sum_j c_j * N(x_j, sigma^2) over the probes. The raw rules
are retained so the blur width can be re-applied without recomputation.

Distances are Jensen-Shannon divergences (natural log, bounded by ln 2)
between the two curves discretized and renormalized on a shared grid. The
scalar heterogeneity index of a collection of densities is the mean JS
distance over all pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError

LN2 = math.log(2.0)
DEFAULT_GRID_POINTS = 2048
MIN_GRID_POINTS = 256
GRID_PAD_SIGMAS = 6.0


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss quadrature rule: nodes and nonnegative weights summing to one."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise InputError("rule needs matching 1-d nodes and weights")
        if np.any(weights < 0):
            raise InputError("quadrature weights must be nonnegative")
        if abs(weights.sum() - 1.0) > 1e-10:
            raise InputError(f"quadrature weights must sum to 1, got {weights.sum()!r}")


@dataclass
class SpectralDensity:
    """Probe-averaged Gaussian-blurred eigenvalue density."""

    rules: list[QuadratureRule]
    sigma: float
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.rules:
            raise InputError("density needs at least one quadrature rule")
        if self.sigma <= 0:
            raise InputError(f"blur width must be positive, got {self.sigma}")

    def all_nodes(self) -> np.ndarray:
        return np.concatenate([r.nodes for r in self.rules])

    def node_range(self) -> tuple[float, float]:
        nodes = self.all_nodes()
        return float(nodes.min()), float(nodes.max())

    def evaluate(self, t) -> np.ndarray | float:
        """Density value(s) at t."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        acc = np.zeros(ts.shape[0])
        inv_two_var = 1.0 / (2.0 * self.sigma**2)
        for rule in self.rules:
            diff = ts[:, None] - rule.nodes[None, :]
            acc += np.exp(-(diff**2) * inv_two_var) @ rule.weights
        acc /= len(self.rules) * self.sigma * math.sqrt(2.0 * math.pi)
        return acc if np.ndim(t) else float(acc[0])

    def with_sigma(self, sigma: float) -> "SpectralDensity":
        """Same rules, new blur width; no spectral computation is redone."""
        return SpectralDensity(self.rules, sigma, self.label, dict(self.meta))

    def with_label(self, label: str) -> "SpectralDensity":
        return SpectralDensity(self.rules, self.sigma, label, dict(self.meta))


def evaluate_density(density: SpectralDensity, t):
    return density.evaluate(t)


def default_sigma(nodes: np.ndarray) -> float:
    """Blur width 1% of the node span (with a floor for degenerate spectra)."""
    nodes = np.asarray(nodes, dtype=float)
    span = float(nodes.max() - nodes.min())
    if span > 0:
        return 0.01 * span
    return 0.01 * max(1.0, abs(float(nodes.max())))


def normalize_axis(density: SpectralDensity, k: int = 10) -> SpectralDensity:
    """Rescale so the k-th largest distinct node becomes 1 (sigma rescales too)."""
    distinct = np.unique(density.all_nodes())
    if len(distinct) < k:
        raise InputError(
            f"normalization needs at least k={k} distinct nodes, found {len(distinct)}; "
            f"lower k"
        )
    ref = float(np.sort(distinct)[::-1][k - 1])
    if ref <= 0:
        raise NumericalError(f"k-th largest node is {ref}; cannot normalize by it")
    rules = [QuadratureRule(r.nodes / ref, r.weights) for r in density.rules]
    return SpectralDensity(rules, density.sigma / ref, density.label, dict(density.meta))


@dataclass(frozen=True)
class GridSpec:
    """Uniform evaluation grid [lo, hi] with a fixed number of points."""

    lo: float
    hi: float
    points: int = DEFAULT_GRID_POINTS

    def __post_init__(self):
        if not self.lo < self.hi:
            raise InputError(f"grid needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.points < MIN_GRID_POINTS:
            raise InputError(f"grid needs at least {MIN_GRID_POINTS} points, got {self.points}")

    def ts(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    @classmethod
    def covering(cls, densities, points: int = DEFAULT_GRID_POINTS) -> "GridSpec":
        """Smallest grid spanning every density's nodes padded by 6 sigma."""
        lo = math.inf
        hi = -math.inf
        for d in densities:
            nmin, nmax = d.node_range()
            lo = min(lo, nmin - GRID_PAD_SIGMAS * d.sigma)
            hi = max(hi, nmax + GRID_PAD_SIGMAS * d.sigma)
        return cls(lo, hi, points)

    def covers(self, density: SpectralDensity) -> bool:
        nmin, nmax = density.node_range()
        pad = GRID_PAD_SIGMAS * density.sigma
        # tiny slack for the round-trip through files
        tol = 1e-9 * max(1.0, abs(nmin - pad), abs(nmax + pad))
        return self.lo <= nmin - pad + tol and self.hi >= nmax + pad - tol

    def to_dict(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "points": self.points}


def _discretize(density: SpectralDensity, ts: np.ndarray) -> np.ndarray:
    p = density.evaluate(ts)
    total = p.sum()
    if not total > 0:
        raise NumericalError(
            f"density {density.label!r} vanishes on the whole grid; widen sigma or the grid"
        )
    return p / total


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def js_distance(a: SpectralDensity, b: SpectralDensity, grid: GridSpec | None = None) -> float:
    """Jensen-Shannon divergence between two densities on a shared grid.

    Natural log, so the value lies in [0, ln 2]; zero iff the discretized
    densities coincide.
    """
    if grid is None:
        grid = GridSpec.covering([a, b])
    else:
        for d in (a, b):
            if not grid.covers(d):
                raise InputError(
                    f"grid [{grid.lo}, {grid.hi}] does not cover density {d.label!r} "
                    f"(nodes {d.node_range()} with sigma {d.sigma})"
                )
    ts = grid.ts()
    p = _discretize(a, ts)
    q = _discretize(b, ts)
    m = 0.5 * (p + q)
    js = 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    return max(js, 0.0)


@dataclass
class HeterogeneityReport:
    """Pairwise JS distances between block densities and their mean."""

    pairwise: np.ndarray
    js0: float
    labels: list[str]
    grid: GridSpec

    def to_dict(self) -> dict:
        return {
            "labels": self.labels,
            "pairwise": self.pairwise.tolist(),
            "js0": self.js0,
            "grid": self.grid.to_dict(),
        }


def heterogeneity_report(densities, grid: GridSpec | None = None) -> HeterogeneityReport:
    """All-pairs JS distances and their upper-triangle mean (the JS0 index)."""
    densities = list(densities)
    n = len(densities)
    if n < 2:
        raise InputError(f"need at least 2 densities, got {n}")
    if grid is None:
        grid = GridSpec.covering(densities)
    pairwise = np.zeros((n, n))
    upper = []
    for i in range(n):
        for j in range(i + 1, n):
            v = js_distance(densities[i], densities[j], grid)
            pairwise[i, j] = pairwise[j, i] = v
            upper.append(v)
    labels = [d.label or f"density-{i}" for i, d in enumerate(densities)]
    return HeterogeneityReport(pairwise, float(np.mean(upper)), labels, grid)

"""Stochastic Lanczos quadrature for spectral density and trace estimation.

For each random probe v the Lanczos tridiagonal matrix is eigendecomposed;
its eigenvalues are Gauss quadrature nodes for the spectral measure induced
by (A, v) and the squared first eigenvector components are the weights. The
probe-averaged Gaussian mixture over those rules approximates the eigenvalue
density. The same machinery gives the Hutchinson trace estimate
tr(A) ~ mean of d * v^T A v over normalized probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError
from .lanczos import Tridiagonal, lanczos
from .operators import BlockPartition, SymmetricOperator, block_restrict
from .seeding import derive_rng
from .spectra import QuadratureRule, SpectralDensity, default_sigma

PROBE_DISTRIBUTIONS = ("gaussian", "rademacher")


@dataclass(frozen=True)
class ProbeConfig:
    """How many probes, how many Lanczos steps, and where randomness comes from."""

    num_probes: int = 10
    steps: int = 100
    distribution: str = "gaussian"
    seed: int = 0
    reorth: bool = True

    def __post_init__(self):
        if self.num_probes < 1:
            raise InputError(f"num_probes must be >= 1, got {self.num_probes}")
        if self.steps < 1:
            raise InputError(f"steps must be >= 1, got {self.steps}")
        if self.distribution not in PROBE_DISTRIBUTIONS:
            raise InputError(
                f"unknown probe distribution {self.distribution!r}; "
                f"choose from {PROBE_DISTRIBUTIONS}"
            )


SIMPLIFIED_CONFIG = ProbeConfig(num_probes=1, steps=10)


def _probe_vector(dim: int, distribution: str, rng: np.random.Generator) -> np.ndarray:
    if distribution == "gaussian":
        u = rng.standard_normal(dim)
    else:
        u = rng.integers(0, 2, size=dim) * 2.0 - 1.0
    return u / np.linalg.norm(u)


def quadrature_from_tridiagonal(tri: Tridiagonal) -> QuadratureRule:
    """Nodes = eigenvalues of T, weights = squared first eigenvector components."""
    vals, vecs = tri.eigh()
    return QuadratureRule(vals, vecs[0] ** 2)


def estimate_quadratic_form(rule: QuadratureRule, f) -> float:
    """Sum of c_j * f(x_j); exact for polynomials of degree < 2m by construction.

    ``f`` may be vectorized over node arrays or a plain scalar function.
    """
    try:
        vals = np.asarray(f(rule.nodes), dtype=float)
        if vals.shape != rule.nodes.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.asarray([f(x) for x in rule.nodes], dtype=float)
    return float(rule.weights @ vals)


def estimate_trace(op: SymmetricOperator, config: ProbeConfig) -> float:
    """Hutchinson trace estimate with normalized probes: mean of d * v^T A v."""
    total = 0.0
    for i in range(config.num_probes):
        rng = derive_rng(config.seed, "probe", i)
        v = _probe_vector(op.dim, config.distribution, rng)
        total += op.dim * float(v @ op.apply(v))
    return total / config.num_probes


def slq_density(
    op: SymmetricOperator,
    config: ProbeConfig,
    sigma: float | None = None,
    label: str = "",
) -> SpectralDensity:
    """Spectral density estimate; one Lanczos run per probe.

    Probe i draws its own generator from (seed, i), so probes can run in any
    order or in parallel with identical results. The Lanczos step count is
    clamped to the operator dimension. ``sigma=None`` selects the default
    blur width (1% of the pooled node span) after all rules are computed.
    """
    if sigma is not None and sigma <= 0:
        raise InputError(f"sigma must be positive, got {sigma}")
    m = min(config.steps, op.dim)
    rules = []
    for i in range(config.num_probes):
        rng = derive_rng(config.seed, "probe", i)
        v = _probe_vector(op.dim, config.distribution, rng)
        tri, _ = lanczos(op, v, m, reorth=config.reorth, rng=rng)
        rules.append(quadrature_from_tridiagonal(tri))
    if sigma is None:
        sigma = default_sigma(np.concatenate([r.nodes for r in rules]))
    meta = {
        "num_probes": config.num_probes,
        "steps": m,
        "distribution": config.distribution,
        "seed": config.seed,
        "reorth": config.reorth,
    }
    return SpectralDensity(rules, sigma, label, meta)


def slq_simplified(
    op: SymmetricOperator,
    part: BlockPartition,
    block_fraction: float = 0.5,
    config: ProbeConfig = SIMPLIFIED_CONFIG,
    seed: int = 0,
):
    """Cheap heterogeneity screen: reduced-size SLQ on a random subset of blocks.

    Samples ceil(block_fraction * L) blocks without replacement and estimates
    each restricted block's density with the reduced probe configuration
    (one probe, ten Lanczos steps by default). Each block draws a fresh
    sub-seed recorded in the density metadata. Returns (block index, density)
    pairs with 1-based indices, sorted by block.
    """
    if not 0.0 < block_fraction <= 1.0:
        raise InputError(f"block_fraction must be in (0, 1], got {block_fraction}")
    num = math.ceil(block_fraction * part.num_blocks)
    rng = derive_rng(seed, "block-sample")
    chosen = sorted(rng.choice(part.num_blocks, size=num, replace=False) + 1)
    out = []
    for l in chosen:
        sub = block_restrict(op, part, int(l))
        block_cfg = replace(config, seed=_block_seed(seed, int(l)))
        density = slq_density(sub, block_cfg, label=f"block-{int(l)}")
        density.meta["parent_seed"] = seed
        out.append((int(l), density))
    return out


def _block_seed(seed: int, l: int) -> int:
    # distinct, reproducible sub-seed per block
    return int(np.random.SeedSequence([seed, l]).generate_state(1)[0])

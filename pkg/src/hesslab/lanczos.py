"""Lanczos tridiagonalization of symmetric operators.

m steps of the three-term recurrence turn an operator A and a unit start
vector v1 into a symmetric tridiagonal matrix T whose eigenvalues (Ritz
values) approximate A's spectrum. Full reorthogonalization is on by default:
the textbook recurrence loses orthogonality in floating point long before
m = 100, and the downstream quadrature rules need an orthonormal basis. The
plain recurrence is kept behind ``reorth=False`` for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import InputError, NumericalError
from .operators import SymmetricOperator
from .seeding import derive_rng

# A computed beta below this (relative to the largest beta seen and 1) means
# the Krylov space became invariant: restart with a fresh orthogonal vector.
BREAKDOWN_REL_TOL = 1e-12


@dataclass
class Tridiagonal:
    """Symmetric tridiagonal matrix: diagonal alpha (m,), off-diagonal beta (m-1,)."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        if self.alpha.ndim != 1 or self.beta.shape != (max(len(self.alpha) - 1, 0),):
            raise InputError("tridiagonal needs alpha (m,) and beta (m-1,)")
        if np.any(self.beta < 0):
            raise InputError("off-diagonal entries must be nonnegative")

    @property
    def steps(self) -> int:
        return len(self.alpha)

    def to_dense(self) -> np.ndarray:
        t = np.diag(self.alpha)
        if self.steps > 1:
            t += np.diag(self.beta, 1) + np.diag(self.beta, -1)
        return t

    def eigh(self):
        """Eigenvalues (ascending) and orthonormal eigenvectors."""
        try:
            return eigh_tridiagonal(self.alpha, self.beta)
        except Exception as exc:  # scipy raises LinAlgError subclasses
            raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc


def _orthogonalize(v: np.ndarray, basis: np.ndarray, passes: int = 2) -> np.ndarray:
    for _ in range(passes):
        v = v - basis.T @ (basis @ v)
    return v


def lanczos(
    op: SymmetricOperator,
    v1: np.ndarray,
    m: int,
    reorth: bool = True,
    rng: np.random.Generator | None = None,
):
    """Run m Lanczos steps from unit vector v1.

    Returns ``(Tridiagonal, basis)`` where basis has shape (steps, dim). On
    breakdown (residual norm below tolerance) the iteration restarts with a
    random vector orthogonalized against all previous basis vectors and the
    corresponding beta is set to zero; if no new direction can be found the
    result is truncated to the steps actually taken.
    """
    v1 = np.asarray(v1, dtype=float)
    if v1.shape != (op.dim,):
        raise InputError(f"start vector shape {v1.shape} does not match dim {op.dim}")
    if abs(np.linalg.norm(v1) - 1.0) > 1e-12:
        raise InputError(f"start vector must have unit norm, got {np.linalg.norm(v1)!r}")
    if not 1 <= m <= op.dim:
        raise InputError(f"step count m={m} must satisfy 1 <= m <= dim={op.dim}")
    if rng is None:
        rng = derive_rng(0, "lanczos-breakdown")

    basis = np.empty((m, op.dim))
    basis[0] = v1
    alphas = np.empty(m)
    betas = np.empty(max(m - 1, 0))

    w = op.apply(v1)
    alphas[0] = w @ v1
    w = w - alphas[0] * v1

    steps = 1
    max_beta = 0.0
    for j in range(1, m):
        beta = float(np.linalg.norm(w))
        if beta < BREAKDOWN_REL_TOL * max(1.0, max_beta):
            vj = _fresh_direction(basis[:j], rng)
            if vj is None:
                break  # whole space exhausted; truncate
            beta = 0.0
        else:
            vj = w / beta
            if reorth:
                vj = _orthogonalize(vj, basis[:j])
                norm = np.linalg.norm(vj)
                if norm < 1e-8:
                    vj = _fresh_direction(basis[:j], rng)
                    if vj is None:
                        break
                else:
                    vj = vj / norm
        max_beta = max(max_beta, beta)
        basis[j] = vj
        w = op.apply(vj)
        alphas[j] = w @ vj
        w = w - alphas[j] * vj - beta * basis[j - 1]
        if reorth:
            w = _orthogonalize(w, basis[: j + 1])
        betas[j - 1] = beta
        steps = j + 1

    tri = Tridiagonal(alphas[:steps].copy(), betas[: steps - 1].copy())
    return tri, basis[:steps]


def _fresh_direction(basis: np.ndarray, rng: np.random.Generator):
    """Random unit vector orthogonal to all rows of ``basis``, or None."""
    dim = basis.shape[1]
    if basis.shape[0] >= dim:
        return None
    for _ in range(8):
        cand = _orthogonalize(rng.standard_normal(dim), basis)
        norm = np.linalg.norm(cand)
        if norm > 1e-6:
            return cand / norm
    return None


def extreme_ritz(op: SymmetricOperator, m: int, seed: int = 0):
    """Estimated (largest, smallest) eigenvalues from a seeded Lanczos run."""
    if m < 2:
        raise InputError(f"extreme_ritz needs m >= 2, got {m}")
    rng = derive_rng(seed, "extreme-ritz")
    u = rng.standard_normal(op.dim)
    v1 = u / np.linalg.norm(u)
    tri, _ = lanczos(op, v1, min(m, op.dim), reorth=True, rng=rng)
    vals, _ = tri.eigh()
    return float(vals[-1]), float(vals[0])

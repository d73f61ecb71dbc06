"""Matrix-free symmetric linear operators and block partitions.

The rest of the package only ever talks to a symmetric operator through
``dim`` and ``apply``; whether the operator is an explicit matrix, a
block-diagonal assembly, or a Hessian-vector-product closure is invisible to
the callers. Operators are immutable after construction and ``apply`` holds
no mutable state, so concurrent use is safe.
"""

from __future__ import annotations

import json
from typing import Callable, Sequence

import numpy as np

from .errors import InputError, NumericalError


def symmetrize(a: np.ndarray) -> np.ndarray:
    """Return (A + A^T)/2, which is exactly symmetric in IEEE arithmetic."""
    a = np.asarray(a, dtype=float)
    return (a + a.T) / 2.0


class SymmetricOperator:
    """A symmetric linear map on R^d exposed through matrix-vector products.

    ``exact`` is True when the operator is backed by explicit dense storage,
    in which case ``to_dense`` is cheap and exact.
    """

    def __init__(self, dim: int, matvec: Callable[[np.ndarray], np.ndarray], exact: bool = False):
        if dim <= 0:
            raise InputError(f"operator dimension must be positive, got {dim}")
        self.dim = int(dim)
        self._matvec = matvec
        self.exact = bool(exact)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.dim,):
            raise InputError(
                f"operator of dim {self.dim} applied to vector of shape {v.shape}"
            )
        out = np.asarray(self._matvec(v), dtype=float)
        if out.shape != (self.dim,):
            raise NumericalError(f"matvec returned shape {out.shape}, expected ({self.dim},)")
        return out

    def to_dense(self) -> np.ndarray:
        """Dense realization, via unit-vector probes for matrix-free operators."""
        cols = np.empty((self.dim, self.dim))
        eye = np.eye(self.dim)
        for i in range(self.dim):
            cols[:, i] = self.apply(eye[i])
        return symmetrize(cols)


class DenseOperator(SymmetricOperator):
    """Symmetric operator backed by an explicit dense matrix."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise InputError(f"dense operator needs a square matrix, got shape {matrix.shape}")
        scale = np.max(np.abs(matrix)) or 1.0
        if np.max(np.abs(matrix - matrix.T)) > 1e-12 * scale:
            raise InputError("matrix is not symmetric")
        self.matrix = symmetrize(matrix)
        super().__init__(matrix.shape[0], self.matrix.__matmul__, exact=True)

    def to_dense(self) -> np.ndarray:
        return self.matrix.copy()


def identity_operator(dim: int) -> SymmetricOperator:
    return DenseOperator(np.eye(dim))


def diagonal_operator(diag: Sequence[float]) -> SymmetricOperator:
    return DenseOperator(np.diag(np.asarray(diag, dtype=float)))


class BlockPartition:
    """Ordered contiguous index ranges covering [0, dim).

    Stored 0-based half-open internally; the JSON interchange format uses
    1-based inclusive [start, end] pairs.
    """

    def __init__(self, ranges: Sequence[tuple[int, int]]):
        ranges = [(int(a), int(b)) for a, b in ranges]
        if not ranges:
            raise InputError("partition needs at least one range")
        pos = 0
        for a, b in ranges:
            if a != pos or b <= a:
                raise InputError(
                    f"partition ranges must be ordered, disjoint and contiguous; "
                    f"got ({a}, {b}) at offset {pos}"
                )
            pos = b
        self.ranges = ranges
        self.dim = pos

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "BlockPartition":
        edges = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        return cls(list(zip(edges[:-1], edges[1:])))

    @property
    def num_blocks(self) -> int:
        return len(self.ranges)

    @property
    def sizes(self) -> list[int]:
        return [b - a for a, b in self.ranges]

    def slice(self, l: int) -> slice:
        """Slice for block ``l`` (1-based, matching the math convention)."""
        if not 1 <= l <= self.num_blocks:
            raise InputError(f"block index {l} out of range 1..{self.num_blocks}")
        a, b = self.ranges[l - 1]
        return slice(a, b)

    @classmethod
    def from_json(cls, path) -> "BlockPartition":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read partition file {path}: {exc}") from exc
        if not isinstance(raw, list):
            raise InputError(f"partition file {path} must hold a JSON list of [start, end]")
        # 1-based inclusive on disk
        return cls([(int(a) - 1, int(b)) for a, b in raw])

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump([[a + 1, b] for a, b in self.ranges], fh)
            fh.write("\n")


def block_restrict(op: SymmetricOperator, part: BlockPartition, l: int) -> SymmetricOperator:
    """Principal-block restriction of ``op`` to partition block ``l`` (1-based).

    Works for matrix-free operators by zero-padding the input to full
    dimension, applying, and projecting back; one full-dimension apply per
    restricted matvec.
    """
    if part.dim != op.dim:
        raise InputError(f"partition covers {part.dim} indices, operator has dim {op.dim}")
    sl = part.slice(l)
    sub_dim = sl.stop - sl.start
    full_dim = op.dim

    def matvec(v: np.ndarray) -> np.ndarray:
        padded = np.zeros(full_dim)
        padded[sl] = v
        return op.apply(padded)[sl]

    return SymmetricOperator(sub_dim, matvec, exact=op.exact)


def make_block_diagonal(blocks: Sequence[np.ndarray]) -> SymmetricOperator:
    """Block-diagonal operator diag(B_1, ..., B_L) from dense symmetric blocks."""
    if len(blocks) == 0:
        raise InputError("need at least one block")
    mats = [DenseOperator(b).matrix for b in blocks]
    part = BlockPartition.from_sizes([m.shape[0] for m in mats])

    def matvec(v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for m, (a, b) in zip(mats, part.ranges):
            out[a:b] = m @ v[a:b]
        return out

    op = SymmetricOperator(part.dim, matvec, exact=True)
    op.blocks = mats
    op.partition = part
    return op


def load_dense_csv(path) -> DenseOperator:
    """Dense symmetric matrix from CSV (one row per line, comma-separated)."""
    try:
        matrix = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read matrix CSV {path}: {exc}") from exc
    return DenseOperator(matrix)

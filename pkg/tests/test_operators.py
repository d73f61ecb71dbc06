import json

import numpy as np
import pytest

from hesslab.errors import InputError
from hesslab.operators import (
    BlockPartition,
    DenseOperator,
    block_restrict,
    diagonal_operator,
    identity_operator,
    load_dense_csv,
    make_block_diagonal,
    symmetrize,
)


def random_symmetric(rng, d, scale=1.0):
    a = rng.standard_normal((d, d)) * scale
    return symmetrize(a)


def test_identity_apply():
    op = identity_operator(3)
    v = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(op.apply(v), v)


def test_diagonal_apply():
    op = diagonal_operator([2.0, 3.0])
    np.testing.assert_array_equal(op.apply(np.array([1.0, 1.0])), [2.0, 3.0])


def test_dense_apply_matches_naive_loop():
    rng = np.random.default_rng(7)
    a = random_symmetric(rng, 5)
    v = rng.standard_normal(5)
    naive = np.array([sum(a[i, j] * v[j] for j in range(5)) for i in range(5)])
    np.testing.assert_allclose(DenseOperator(a).apply(v), naive, rtol=1e-12, atol=1e-14)


def test_apply_rejects_dimension_mismatch():
    op = identity_operator(3)
    with pytest.raises(InputError, match="dim 3"):
        op.apply(np.ones(4))


def test_dense_rejects_asymmetric():
    with pytest.raises(InputError, match="symmetric"):
        DenseOperator(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_apply_is_deterministic():
    rng = np.random.default_rng(0)
    op = DenseOperator(random_symmetric(rng, 8))
    v = rng.standard_normal(8)
    first = op.apply(v)
    for _ in range(3):
        np.testing.assert_array_equal(op.apply(v), first)


def test_symmetry_on_random_probes():
    rng = np.random.default_rng(42)
    op = DenseOperator(random_symmetric(rng, 12))
    norm_est = np.linalg.norm(op.matrix, 2)
    for _ in range(32):
        u = rng.standard_normal(12)
        v = rng.standard_normal(12)
        lhs = u @ op.apply(v)
        rhs = v @ op.apply(u)
        bound = 1e-10 * np.linalg.norm(u) * np.linalg.norm(v) * norm_est
        assert abs(lhs - rhs) <= bound


class TestBlockPartition:
    def test_from_sizes(self):
        part = BlockPartition.from_sizes([2, 3])
        assert part.dim == 5
        assert part.sizes == [2, 3]
        assert part.num_blocks == 2

    def test_rejects_gap(self):
        with pytest.raises(InputError):
            BlockPartition([(0, 2), (3, 5)])

    def test_rejects_overlap(self):
        with pytest.raises(InputError):
            BlockPartition([(0, 3), (2, 5)])

    def test_rejects_empty_range(self):
        with pytest.raises(InputError):
            BlockPartition([(0, 0)])

    def test_json_round_trip(self, tmp_path):
        part = BlockPartition.from_sizes([3, 1, 4])
        path = tmp_path / "partition.json"
        part.to_json(path)
        # on disk: 1-based inclusive
        assert json.loads(path.read_text()) == [[1, 3], [4, 4], [5, 8]]
        loaded = BlockPartition.from_json(path)
        assert loaded.ranges == part.ranges

    def test_slice_bounds(self):
        part = BlockPartition.from_sizes([2, 2])
        with pytest.raises(InputError):
            part.slice(0)
        with pytest.raises(InputError):
            part.slice(3)


class TestBlockRestrict:
    def test_block_diagonal_exact(self):
        rng = np.random.default_rng(3)
        h1 = random_symmetric(rng, 2)
        h2 = random_symmetric(rng, 3)
        op = make_block_diagonal([h1, h2])
        sub = block_restrict(op, op.partition, 2)
        v = rng.standard_normal(3)
        np.testing.assert_array_equal(sub.apply(v), h2 @ v)

    def test_dense_submatrix_oracle(self):
        rng = np.random.default_rng(5)
        a = random_symmetric(rng, 4)
        part = BlockPartition.from_sizes([2, 2])
        sub = block_restrict(DenseOperator(a), part, 1)
        v = rng.standard_normal(2)
        np.testing.assert_allclose(sub.apply(v), a[:2, :2] @ v, rtol=1e-14, atol=1e-15)

    def test_out_of_range_block(self):
        op = identity_operator(4)
        part = BlockPartition.from_sizes([2, 2])
        for bad in (0, 3):
            with pytest.raises(InputError):
                block_restrict(op, part, bad)

    def test_restrict_then_reassemble(self):
        rng = np.random.default_rng(11)
        blocks = [random_symmetric(rng, d) for d in (3, 4, 2)]
        op = make_block_diagonal(blocks)
        restricted = [
            block_restrict(op, op.partition, l).to_dense()
            for l in range(1, 4)
        ]
        rebuilt = make_block_diagonal(restricted)
        for _ in range(5):
            v = rng.standard_normal(9)
            np.testing.assert_allclose(rebuilt.apply(v), op.apply(v), atol=1e-12)


class TestMakeBlockDiagonal:
    def test_scalar_blocks(self):
        op = make_block_diagonal([np.array([[2.0]]), np.array([[3.0]])])
        np.testing.assert_array_equal(op.to_dense(), np.diag([2.0, 3.0]))

    def test_rejects_empty(self):
        with pytest.raises(InputError):
            make_block_diagonal([])

    def test_unit_vector_probe(self):
        rng = np.random.default_rng(9)
        h1 = random_symmetric(rng, 2)
        h2 = random_symmetric(rng, 2)
        op = make_block_diagonal([h1, h2])
        out = op.apply(np.array([1.0, 0.0, 0.0, 0.0]))
        np.testing.assert_array_equal(out[:2], h1[:, 0])
        np.testing.assert_array_equal(out[2:], [0.0, 0.0])

    def test_off_diagonal_blocks_zero(self):
        rng = np.random.default_rng(13)
        op = make_block_diagonal([random_symmetric(rng, 3), random_symmetric(rng, 2)])
        dense = op.to_dense()
        np.testing.assert_array_equal(dense[:3, 3:], np.zeros((3, 2)))

    def test_spectrum_is_union_of_block_spectra(self):
        rng = np.random.default_rng(17)
        blocks = [random_symmetric(rng, d) for d in (4, 6, 3)]
        op = make_block_diagonal(blocks)
        expected = np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in blocks]))
        got = np.sort(np.linalg.eigvalsh(op.to_dense()))
        np.testing.assert_allclose(got, expected, atol=1e-10)


def test_load_dense_csv(tmp_path):
    path = tmp_path / "mat.csv"
    path.write_text("1.0,2.0\n2.0,5.0\n")
    op = load_dense_csv(path)
    np.testing.assert_array_equal(op.matrix, [[1.0, 2.0], [2.0, 5.0]])


def test_load_dense_csv_missing(tmp_path):
    with pytest.raises(InputError):
        load_dense_csv(tmp_path / "absent.csv")

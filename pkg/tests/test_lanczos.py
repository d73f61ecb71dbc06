import numpy as np
import pytest

from hesslab.errors import InputError
from hesslab.lanczos import Tridiagonal, extreme_ritz, lanczos
from hesslab.operators import DenseOperator, diagonal_operator, identity_operator, symmetrize


def random_symmetric_op(rng, d, scale=1.0):
    return DenseOperator(symmetrize(rng.standard_normal((d, d)) * scale))


def unit(rng, d):
    v = rng.standard_normal(d)
    return v / np.linalg.norm(v)


def test_one_dimensional():
    tri, basis = lanczos(diagonal_operator([5.0]), np.array([1.0]), 1)
    np.testing.assert_array_equal(tri.alpha, [5.0])
    assert tri.beta.size == 0
    assert basis.shape == (1, 1)


def test_recovers_tridiagonal_input():
    # operator that is already tridiagonal, started from e1: the recurrence
    # reproduces the diagonal and |off-diagonal| entries
    alpha = np.array([1.0, -2.0, 0.5, 3.0, 1.5])
    beta = np.array([0.7, 1.3, 0.2, 2.0])
    t = Tridiagonal(alpha, beta).to_dense()
    e1 = np.zeros(5)
    e1[0] = 1.0
    tri, _ = lanczos(DenseOperator(t), e1, 5)
    np.testing.assert_allclose(tri.alpha, alpha, atol=1e-10)
    np.testing.assert_allclose(tri.beta, np.abs(beta), atol=1e-10)


def test_full_run_matches_dense_eigensolver():
    rng = np.random.default_rng(1)
    op = random_symmetric_op(rng, 50)
    tri, _ = lanczos(op, unit(rng, 50), 50, reorth=True)
    got, _ = tri.eigh()
    expected = np.linalg.eigvalsh(op.matrix)
    np.testing.assert_allclose(np.sort(got), expected, atol=1e-8)


@pytest.mark.parametrize("d", [16, 64])
def test_exact_identity_at_full_steps(d):
    rng = np.random.default_rng(d)
    op = random_symmetric_op(rng, d)
    tri, _ = lanczos(op, unit(rng, d), d, reorth=True)
    got, _ = tri.eigh()
    np.testing.assert_allclose(np.sort(got), np.linalg.eigvalsh(op.matrix), atol=1e-8)


def test_basis_orthonormal_with_reorth():
    rng = np.random.default_rng(2)
    op = random_symmetric_op(rng, 120)
    tri, basis = lanczos(op, unit(rng, 120), 100, reorth=True)
    gram = basis @ basis.T
    assert np.max(np.abs(gram - np.eye(100))) <= 1e-8


def test_ritz_containment():
    rng = np.random.default_rng(3)
    op = random_symmetric_op(rng, 40)
    spectrum = np.linalg.eigvalsh(op.matrix)
    norm = max(abs(spectrum[0]), abs(spectrum[-1]))
    for m in (5, 15, 30):
        tri, _ = lanczos(op, unit(rng, 40), m)
        vals, _ = tri.eigh()
        assert vals[0] >= spectrum[0] - 1e-8 * norm
        assert vals[-1] <= spectrum[-1] + 1e-8 * norm


def test_extreme_ritz_monotone_in_m():
    rng = np.random.default_rng(4)
    op = random_symmetric_op(rng, 24)
    v1 = unit(rng, 24)
    highs, lows = [], []
    for m in range(2, 25):
        tri, _ = lanczos(op, v1, m)
        vals, _ = tri.eigh()
        highs.append(vals[-1])
        lows.append(vals[0])
    assert np.all(np.diff(highs) >= -1e-10)
    assert np.all(np.diff(lows) <= 1e-10)


def test_beta_nonnegative():
    rng = np.random.default_rng(5)
    op = random_symmetric_op(rng, 30)
    tri, _ = lanczos(op, unit(rng, 30), 20)
    assert np.all(tri.beta >= 0)


def test_breakdown_restarts_with_orthogonal_vector():
    # identity: the Krylov space is exhausted after one step, every beta is a
    # breakdown, and the restart rule keeps producing orthonormal directions
    op = identity_operator(6)
    e1 = np.zeros(6)
    e1[0] = 1.0
    tri, basis = lanczos(op, e1, 6)
    np.testing.assert_allclose(tri.alpha, np.ones(6), atol=1e-12)
    np.testing.assert_allclose(tri.beta, np.zeros(5), atol=1e-10)
    gram = basis @ basis.T
    assert np.max(np.abs(gram - np.eye(6))) <= 1e-8


def test_breakdown_on_invariant_subspace():
    # start inside a 2-dimensional invariant subspace of a 4-d operator
    op = diagonal_operator([1.0, 2.0, 7.0, 9.0])
    v1 = np.array([1.0, 1.0, 0.0, 0.0]) / np.sqrt(2)
    tri, _ = lanczos(op, v1, 4)
    vals, _ = tri.eigh()
    # the restart explores the remaining invariant subspace
    np.testing.assert_allclose(np.sort(vals), [1.0, 2.0, 7.0, 9.0], atol=1e-8)


def test_rejects_bad_arguments():
    op = identity_operator(4)
    v = np.zeros(4)
    v[0] = 1.0
    with pytest.raises(InputError, match="unit norm"):
        lanczos(op, 2 * v, 2)
    with pytest.raises(InputError, match="m="):
        lanczos(op, v, 0)
    with pytest.raises(InputError, match="m="):
        lanczos(op, v, 5)
    with pytest.raises(InputError, match="shape"):
        lanczos(op, np.array([1.0]), 1)


def test_tridiagonal_validation():
    with pytest.raises(InputError):
        Tridiagonal(np.array([1.0, 2.0]), np.array([-0.5]))
    with pytest.raises(InputError):
        Tridiagonal(np.array([1.0, 2.0]), np.array([1.0, 2.0]))


class TestExtremeRitz:
    def test_identity(self):
        mx, mn = extreme_ritz(identity_operator(20), 5)
        assert abs(mx - 1.0) < 1e-12 and abs(mn - 1.0) < 1e-12

    def test_uniform_diagonal(self):
        # uniformly spaced spectrum: extreme Ritz values need m ~ d/2 for
        # 1e-6 relative accuracy (the relative spectral gaps are ~1%)
        op = diagonal_operator(np.arange(1.0, 101.0))
        mx, mn = extreme_ritz(op, 50)
        assert abs(mx - 100.0) / 100.0 < 1e-6
        assert abs(mn - 1.0) < 1e-6

    def test_separated_spectrum_converges_fast(self):
        eigs = np.concatenate([[1.0], np.linspace(40.0, 60.0, 98), [100.0]])
        mx, mn = extreme_ritz(diagonal_operator(eigs), 30)
        assert abs(mx - 100.0) / 100.0 < 1e-6
        assert abs(mn - 1.0) < 1e-6

    def test_rejects_small_m(self):
        with pytest.raises(InputError):
            extreme_ritz(identity_operator(4), 1)

    def test_deterministic(self):
        rng = np.random.default_rng(6)
        op = random_symmetric_op(rng, 15)
        assert extreme_ritz(op, 10, seed=3) == extreme_ritz(op, 10, seed=3)

import numpy as np
import pytest

from hesslab.errors import InputError
from hesslab.lanczos import Tridiagonal, lanczos
from hesslab.operators import (
    BlockPartition,
    DenseOperator,
    SymmetricOperator,
    diagonal_operator,
    identity_operator,
    make_block_diagonal,
    symmetrize,
)
from hesslab.slq import (
    ProbeConfig,
    estimate_quadratic_form,
    estimate_trace,
    quadrature_from_tridiagonal,
    slq_density,
    slq_simplified,
)
from hesslab.spectra import js_distance, SpectralDensity, QuadratureRule


class CountingOperator(SymmetricOperator):
    """Wrapper counting apply calls; test-only instrumentation."""

    def __init__(self, inner):
        self.calls = 0

        def matvec(v):
            self.calls += 1
            return inner.apply(v)

        super().__init__(inner.dim, matvec, exact=inner.exact)


def exact_density(eigvals, sigma, label="exact"):
    eigvals = np.asarray(eigvals, dtype=float)
    rule = QuadratureRule(eigvals, np.full(len(eigvals), 1.0 / len(eigvals)))
    return SpectralDensity([rule], sigma, label)


class TestQuadratureFromTridiagonal:
    def test_single_node(self):
        rule = quadrature_from_tridiagonal(Tridiagonal([5.0], []))
        np.testing.assert_array_equal(rule.nodes, [5.0])
        np.testing.assert_array_equal(rule.weights, [1.0])

    def test_decoupled_diagonal(self):
        rule = quadrature_from_tridiagonal(Tridiagonal([1.0, 2.0], [0.0]))
        order = np.argsort(rule.nodes)
        np.testing.assert_allclose(rule.nodes[order], [1.0, 2.0])
        np.testing.assert_allclose(rule.weights[order], [1.0, 0.0], atol=1e-15)

    def test_moments_match_matrix_powers(self):
        # oracle: k-th moment of the rule equals e1^T T^k e1 by direct powers
        rng = np.random.default_rng(10)
        tri = Tridiagonal(rng.standard_normal(10), np.abs(rng.standard_normal(9)))
        rule = quadrature_from_tridiagonal(tri)
        t = tri.to_dense()
        e1 = np.zeros(10)
        e1[0] = 1.0
        power = e1.copy()
        for k in range(6):
            moment = rule.weights @ rule.nodes**k
            np.testing.assert_allclose(moment, e1 @ power, rtol=1e-9, atol=1e-9)
            power = t @ power

    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            tri = Tridiagonal(rng.standard_normal(8), np.abs(rng.standard_normal(7)))
            rule = quadrature_from_tridiagonal(tri)
            assert abs(rule.weights.sum() - 1.0) <= 1e-10
            assert np.all(rule.weights >= 0)


class TestEstimateQuadraticForm:
    def test_constant_function(self):
        rng = np.random.default_rng(12)
        tri = Tridiagonal(rng.standard_normal(6), np.abs(rng.standard_normal(5)))
        rule = quadrature_from_tridiagonal(tri)
        assert estimate_quadratic_form(rule, lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-12)

    def test_first_moment_is_alpha1(self):
        rng = np.random.default_rng(13)
        alpha = rng.standard_normal(7)
        tri = Tridiagonal(alpha, np.abs(rng.standard_normal(6)))
        rule = quadrature_from_tridiagonal(tri)
        assert estimate_quadratic_form(rule, lambda x: x) == pytest.approx(alpha[0], abs=1e-10)

    def test_scalar_function_accepted(self):
        rule = QuadratureRule([1.0, 3.0], [0.5, 0.5])
        # a python-only callable that cannot take arrays
        assert estimate_quadratic_form(rule, lambda x: float(x) ** 2) == pytest.approx(5.0)

    def test_polynomial_exactness_against_dense_oracle(self):
        # degree <= 2m-1 polynomials are integrated exactly: compare with
        # v^T p(A) v computed by eigendecomposition
        rng = np.random.default_rng(14)
        for trial in range(20):
            d = int(rng.integers(4, 31))
            m = int(rng.integers(2, min(12, d) + 1))
            a = symmetrize(rng.standard_normal((d, d))) / np.sqrt(d)
            v = rng.standard_normal(d)
            v /= np.linalg.norm(v)
            coeffs = rng.uniform(-1, 1, int(rng.integers(1, 2 * m + 1)))  # degree <= 2m-1
            tri, _ = lanczos(DenseOperator(a), v, m)
            rule = quadrature_from_tridiagonal(tri)
            got = estimate_quadratic_form(rule, lambda x: np.polyval(coeffs, x))
            vals, vecs = np.linalg.eigh(a)
            expected = float((vecs.T @ v) ** 2 @ np.polyval(coeffs, vals))
            assert abs(got - expected) <= 1e-8 * (1 + abs(expected))


class TestEstimateTrace:
    def test_identity_is_exact(self):
        for dist in ("gaussian", "rademacher"):
            got = estimate_trace(identity_operator(17), ProbeConfig(3, 2, dist, seed=1))
            assert got == pytest.approx(17.0, rel=1e-12)

    def test_zero_matrix(self):
        op = DenseOperator(np.zeros((5, 5)))
        assert estimate_trace(op, ProbeConfig(4, 2, seed=2)) == 0.0

    def test_statistical_accuracy(self):
        op = diagonal_operator([1.0, 2.0, 3.0])
        got = estimate_trace(op, ProbeConfig(num_probes=10**5, steps=1, seed=3))
        assert abs(got - 6.0) / 6.0 < 0.02

    def test_unbiased_within_three_standard_errors(self):
        rng = np.random.default_rng(15)
        a = symmetrize(rng.standard_normal((20, 20)))
        op = DenseOperator(a)
        true = np.trace(a)
        n = 10**4
        est = estimate_trace(op, ProbeConfig(num_probes=n, steps=1, seed=4))
        # exact variance of d * v^T A v for v uniform on the unit sphere
        lam = np.linalg.eigvalsh(a)
        var_single = 2 * op.dim / (op.dim + 2) * (np.sum(lam**2) - np.sum(lam) ** 2 / op.dim)
        se = np.sqrt(var_single / n)
        assert abs(est - true) <= 3 * se + 1e-9


class TestSlqDensity:
    def test_constant_spectrum_single_bump(self):
        op = diagonal_operator([4.0] * 12)
        density = slq_density(op, ProbeConfig(2, 5, seed=5))
        nodes = density.all_nodes()
        np.testing.assert_allclose(nodes, 4.0, atol=1e-10)
        peak = density.evaluate(4.0)
        assert peak == pytest.approx(1.0 / (density.sigma * np.sqrt(2 * np.pi)), rel=1e-6)

    def test_dense_oracle_js_below_threshold(self):
        rng = np.random.default_rng(16)
        eigs = np.sort(np.concatenate([rng.uniform(0, 1, 80), rng.uniform(5, 10, 20)]))
        q, r = np.linalg.qr(rng.standard_normal((100, 100)))
        a = symmetrize((q * eigs) @ q.T)
        op = DenseOperator(a)
        density = slq_density(op, ProbeConfig(10, 100, seed=6))
        exact = exact_density(np.linalg.eigvalsh(a), density.sigma)
        assert js_distance(density, exact) < 0.01

    def test_probe_distribution_equivalence(self):
        rng = np.random.default_rng(17)
        eigs = np.linspace(-2.0, 3.0, 100)
        q, r = np.linalg.qr(rng.standard_normal((100, 100)))
        a = symmetrize((q * eigs) @ q.T)
        op = DenseOperator(a)
        d_gauss = slq_density(op, ProbeConfig(10, 100, "gaussian", seed=7))
        d_rad = slq_density(op, ProbeConfig(10, 100, "rademacher", seed=7))
        assert js_distance(d_gauss, d_rad) < 0.02

    def test_sigma_reapplication_runs_no_lanczos(self):
        inner = diagonal_operator(np.linspace(1, 2, 30))
        counting = CountingOperator(inner)
        density = slq_density(counting, ProbeConfig(3, 10, seed=8))
        calls_before = counting.calls
        reblurred = density.with_sigma(density.sigma * 2)
        assert counting.calls == calls_before
        assert reblurred.sigma == density.sigma * 2
        assert reblurred.rules is density.rules or reblurred.rules == density.rules

    def test_steps_clamped_to_dimension(self):
        op = diagonal_operator([1.0, 2.0, 3.0])
        density = slq_density(op, ProbeConfig(1, 10, seed=9))
        assert density.meta["steps"] == 3
        np.testing.assert_allclose(np.sort(density.rules[0].nodes), [1.0, 2.0, 3.0], atol=1e-8)

    def test_rejects_bad_sigma(self):
        op = identity_operator(3)
        with pytest.raises(InputError):
            slq_density(op, ProbeConfig(1, 2, seed=0), sigma=0.0)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(18)
        op = DenseOperator(symmetrize(rng.standard_normal((12, 12))))
        a = slq_density(op, ProbeConfig(4, 6, seed=10))
        b = slq_density(op, ProbeConfig(4, 6, seed=10))
        for ra, rb in zip(a.rules, b.rules):
            np.testing.assert_array_equal(ra.nodes, rb.nodes)
            np.testing.assert_array_equal(ra.weights, rb.weights)


class TestSlqSimplified:
    def _block_operator(self, rng, sizes):
        blocks = [symmetrize(rng.standard_normal((d, d))) for d in sizes]
        return make_block_diagonal(blocks)

    def test_full_fraction_covers_all_blocks(self):
        rng = np.random.default_rng(19)
        op = self._block_operator(rng, [3, 4])
        out = slq_simplified(op, op.partition, block_fraction=1.0, seed=0)
        assert [l for l, _ in out] == [1, 2]

    def test_half_fraction_is_deterministic(self):
        rng = np.random.default_rng(20)
        op = self._block_operator(rng, [2] * 10)
        first = slq_simplified(op, op.partition, block_fraction=0.5, seed=42)
        second = slq_simplified(op, op.partition, block_fraction=0.5, seed=42)
        assert len(first) == 5
        assert [l for l, _ in first] == [l for l, _ in second]
        for (_, da), (_, db) in zip(first, second):
            np.testing.assert_array_equal(da.all_nodes(), db.all_nodes())

    def test_rejects_bad_fraction(self):
        rng = np.random.default_rng(21)
        op = self._block_operator(rng, [2, 2])
        with pytest.raises(InputError):
            slq_simplified(op, op.partition, block_fraction=0.0)

    def test_reduced_defaults(self):
        rng = np.random.default_rng(22)
        op = self._block_operator(rng, [20, 20])
        out = slq_simplified(op, op.partition, block_fraction=1.0, seed=1)
        for _, density in out:
            assert density.meta["num_probes"] == 1
            assert density.meta["steps"] == 10

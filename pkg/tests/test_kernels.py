import numpy as np
import pytest

from pairlearn import (
    Kernel,
    RkhsFunction,
    evaluate,
    gram_matrix,
    h_norm_sq,
    kernel_eval,
    load_precomputed_kernel,
    sup_norm,
)


class TestKernelEval:
    def test_gaussian_zero_distance(self, gaussian):
        assert kernel_eval(gaussian, [0.3, -1.2], [0.3, -1.2]) == 1.0

    def test_gaussian_unit_distance(self, gaussian):
        # ||x - x'||_2^2 = 1
        assert kernel_eval(gaussian, [0.0], [1.0]) == pytest.approx(
            np.exp(-1.0), rel=1e-15
        )

    def test_abel(self):
        abel = Kernel("abel_rbf", gamma=2.0)
        # ||x - x'||_1 = 2  ->  exp(-1)
        assert kernel_eval(abel, [0.0, 0.0], [1.0, 1.0]) == pytest.approx(
            np.exp(-1.0), rel=1e-15
        )

    def test_linear(self):
        lin = Kernel("linear")
        assert kernel_eval(lin, [1.0, 0.0], [0.0, 1.0]) == 0.0
        assert kernel_eval(lin, [1.0, 2.0], [3.0, 4.0]) == 11.0

    def test_symmetry(self, rng, gaussian):
        abel = Kernel("abel_rbf", gamma=0.7)
        for _ in range(50):
            x, xp = rng.normal(size=3), rng.normal(size=3)
            for k in (gaussian, abel, Kernel("linear")):
                assert kernel_eval(k, x, xp) == kernel_eval(k, xp, x)

    def test_dimension_mismatch(self, gaussian):
        with pytest.raises(ValueError):
            kernel_eval(gaussian, [1.0], [1.0, 2.0])

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            Kernel("gaussian_rbf", gamma=0.0)
        with pytest.raises(ValueError):
            Kernel("gaussian_rbf", gamma=-1.0)
        with pytest.raises(ValueError):
            Kernel("gaussian_rbf")

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            Kernel("polynomial")


class TestGram:
    def test_duplicate_points(self, gaussian):
        g = gram_matrix(gaussian, [[0.0], [0.0]])
        assert np.array_equal(g, np.ones((2, 2)))

    def test_two_points(self, gaussian):
        g = gram_matrix(gaussian, [[0.0], [1.0]])
        e = np.exp(-1.0)
        assert g == pytest.approx(np.array([[1.0, e], [e, 1.0]]), rel=1e-15)

    def test_linear_orthogonal(self):
        g = gram_matrix(Kernel("linear"), [[1.0, 0.0], [0.0, 1.0]])
        assert np.array_equal(g, np.eye(2))

    def test_exact_symmetry(self, rng):
        for k in (
            Kernel("gaussian_rbf", gamma=0.5),
            Kernel("abel_rbf", gamma=2.0),
            Kernel("linear"),
        ):
            pts = rng.normal(size=(17, 3))
            g = gram_matrix(k, pts)
            assert np.array_equal(g, g.T)

    def test_psd_random_instances(self, rng):
        for trial in range(50):
            n = int(rng.integers(2, 31))
            pts = rng.normal(size=(n, int(rng.integers(1, 4))))
            k = Kernel("gaussian_rbf", gamma=float(rng.uniform(0.2, 3.0)))
            g = gram_matrix(k, pts)
            assert np.linalg.eigvalsh(g).min() >= -1e-8

    def test_empty_points(self, gaussian):
        with pytest.raises(ValueError):
            gram_matrix(gaussian, np.empty((0, 2)))

    def test_diagonal_matches_kernel_eval(self, rng, gaussian):
        pts = rng.normal(size=(6, 2))
        g = gram_matrix(gaussian, pts)
        for i, p in enumerate(pts):
            assert g[i, i] == kernel_eval(gaussian, p, p)


class TestSupNorm:
    def test_rbf_families(self):
        assert sup_norm(Kernel("gaussian_rbf", gamma=0.5)) == 1.0
        assert sup_norm(Kernel("abel_rbf", gamma=3.0)) == 1.0

    def test_linear_unbounded(self):
        lin = Kernel("linear")
        assert sup_norm(lin) == np.inf
        assert not lin.bounded

    def test_precomputed(self):
        m = np.array([[4.0, 1.0], [1.0, 9.0]])
        k = Kernel("precomputed", matrix=m)
        assert sup_norm(k) == 3.0
        assert k.bounded


class TestEvaluate:
    def test_zero_coefficients(self, rng, gaussian):
        f = RkhsFunction(np.zeros(4), rng.normal(size=(4, 2)), gaussian)
        assert np.array_equal(evaluate(f, rng.normal(size=(10, 2))), np.zeros(10))

    def test_single_anchor(self, gaussian):
        x0 = np.array([[0.5, -0.5]])
        f = RkhsFunction(np.array([2.5]), x0, gaussian)
        assert evaluate(f, x0)[0] == 2.5  # k(x0, x0) = 1

    def test_direct_summation_oracle(self, rng, gaussian):
        # oracle: f(x) = sum_b alpha_b k(x, x_b) summed point by point
        anchors = rng.normal(size=(2, 3))
        alpha = rng.normal(size=2)
        f = RkhsFunction(alpha, anchors, gaussian)
        xs = rng.normal(size=(25, 3))
        expected = np.array(
            [
                sum(
                    alpha[b] * kernel_eval(gaussian, x, anchors[b])
                    for b in range(2)
                )
                for x in xs
            ]
        )
        assert evaluate(f, xs) == pytest.approx(expected, abs=1e-15)

    def test_anchors_evaluation_equals_gram_action(self, rng, gaussian):
        anchors = rng.normal(size=(7, 2))
        alpha = rng.normal(size=7)
        f = RkhsFunction(alpha, anchors, gaussian)
        g = gram_matrix(gaussian, anchors)
        assert evaluate(f, anchors) == pytest.approx(g @ alpha, rel=1e-13)

    def test_dimension_mismatch(self, rng, gaussian):
        f = RkhsFunction(np.ones(3), rng.normal(size=(3, 2)), gaussian)
        with pytest.raises(ValueError):
            evaluate(f, rng.normal(size=(5, 3)))


class TestHNorm:
    def test_zero(self, rng, gaussian):
        f = RkhsFunction(np.zeros(5), rng.normal(size=(5, 2)), gaussian)
        assert h_norm_sq(f) == 0.0

    def test_single_anchor(self, gaussian):
        f = RkhsFunction(np.array([2.0]), np.array([[1.0, 1.0]]), gaussian)
        assert h_norm_sq(f) == 4.0

    def test_double_sum_oracle(self, rng, gaussian):
        # oracle: ||sum_b alpha_b Phi(x_b)||^2 expanded as the double sum
        anchors = rng.normal(size=(9, 2))
        alpha = rng.normal(size=9)
        f = RkhsFunction(alpha, anchors, gaussian)
        expected = sum(
            alpha[a] * alpha[b] * kernel_eval(gaussian, anchors[a], anchors[b])
            for a in range(9)
            for b in range(9)
        )
        assert h_norm_sq(f) == pytest.approx(expected, rel=1e-12)

    def test_gram_size_mismatch(self, rng, gaussian):
        f = RkhsFunction(np.ones(4), rng.normal(size=(4, 2)), gaussian)
        with pytest.raises(ValueError):
            h_norm_sq(f, gram=np.eye(3))

    def test_negative_roundoff_clamped(self, gaussian):
        # duplicated anchors with cancelling coefficients: exact zero function
        anchors = np.array([[0.0, 0.0], [0.0, 0.0]])
        f = RkhsFunction(np.array([1e8, -1e8]), anchors, gaussian)
        assert h_norm_sq(f) >= 0.0

    def test_sup_norm_bound(self, rng, gaussian):
        # |f(x)| <= ||k||_inf * ||f||_H on 10^4 random evaluation points
        anchors = rng.normal(size=(12, 2))
        alpha = rng.normal(size=12)
        f = RkhsFunction(alpha, anchors, gaussian)
        xs = rng.normal(size=(10000, 2)) * 3.0
        bound = sup_norm(gaussian) * np.sqrt(h_norm_sq(f))
        assert np.max(np.abs(evaluate(f, xs))) <= bound + 1e-10


class TestPrecomputed:
    def test_csv_round_trip(self, tmp_path, rng):
        pts = rng.normal(size=(5, 2))
        g = gram_matrix(Kernel("gaussian_rbf", gamma=1.0), pts)
        path = tmp_path / "kernel.csv"
        np.savetxt(path, g, delimiter=",", fmt="%.17g")
        k = load_precomputed_kernel(path)
        assert np.allclose(k.matrix, g, rtol=1e-15)
        idx = np.arange(5, dtype=float).reshape(-1, 1)
        assert np.array_equal(gram_matrix(k, idx), k.matrix)

    def test_index_out_of_range(self):
        k = Kernel("precomputed", matrix=np.eye(3))
        with pytest.raises(ValueError):
            kernel_eval(k, [0.0], [3.0])

    def test_asymmetric_rejected(self):
        m = np.array([[1.0, 0.5], [0.4, 1.0]])
        with pytest.raises(ValueError):
            Kernel("precomputed", matrix=m)

    def test_equality_with_matrix(self):
        k1 = Kernel("precomputed", matrix=np.eye(3))
        k2 = Kernel("precomputed", matrix=np.eye(3))
        k3 = Kernel("precomputed", matrix=2.0 * np.eye(3))
        assert k1 == k2
        assert k1 != k3
        assert k1 != Kernel("gaussian_rbf", gamma=1.0)

    def test_non_psd_warning_logged(self, caplog):
        m = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3, -1
        with caplog.at_level("WARNING", logger="pairlearn.kernels"):
            Kernel("precomputed", matrix=m)
        assert any("PSD" in rec.message for rec in caplog.records)

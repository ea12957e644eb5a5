import numpy as np
import pytest

from pairlearn import (
    Dataset,
    RkhsFunction,
    empirical_risk,
    empirical_shifted_risk,
    gram_matrix,
    make_loss,
    regularized_risk,
    risk_gradient_coeffs,
    risk_hessian_coeffs,
)

from conftest import ALL_FAMILIES, DIFFERENTIABLE_FAMILIES, build_loss, random_dataset


def brute_force_risk(loss, data, fvals, weights=None):
    """Oracle: the double sum over ordered pairs, term by term."""
    n = data.n
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights)
    total = 0.0
    for i in range(n):
        for j in range(n):
            total += w[i] * w[j] * loss.value(
                data.xs[i], data.ys[i], data.xs[j], data.ys[j],
                fvals[i], fvals[j],
            )
    return total


class TestDataset:
    def test_validation(self):
        with pytest.raises(ValueError):
            Dataset(np.empty((0, 2)), np.empty(0))
        with pytest.raises(ValueError):
            Dataset(np.ones((3, 2)), np.ones(2))
        with pytest.raises(ValueError):
            Dataset(np.array([[np.nan]]), np.array([1.0]))

    def test_1d_inputs_promoted(self):
        data = Dataset(np.arange(4.0), np.arange(4.0))
        assert data.xs.shape == (4, 1)


class TestEmpiricalRisk:
    @pytest.mark.parametrize(
        "family,params",
        [("mee", {"h": 1.0}), ("absolute", {}), ("logistic_pairwise", {"a": 0.5}),
         ("squared", {})],
    )
    def test_constant_everything_is_zero(self, family, params):
        loss = build_loss(family, params)
        data = Dataset(np.arange(5.0).reshape(-1, 1), np.full(5, 2.0))
        assert empirical_risk(loss, data, np.full(5, 0.7)) == 0.0

    def test_squared_variance_identity(self, rng):
        # (1/n^2) sum sum (r_i - r_j)^2 = 2 Var_n(r), verified against the
        # brute-force double sum
        sq = make_loss("squared")
        data = random_dataset(rng, n=17)
        fvals = rng.normal(size=17)
        risk = empirical_risk(sq, data, fvals)
        r = data.ys - fvals
        identity = 2.0 * (np.mean(r * r) - np.mean(r) ** 2)
        assert risk == pytest.approx(identity, rel=1e-12)
        assert risk == pytest.approx(brute_force_risk(sq, data, fvals), rel=1e-12)

    def test_absolute_two_points(self):
        # residuals (0, 1): pairs give |0|, |-1|, |1|, |0| -> risk 1/2
        ab = make_loss("absolute")
        data = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
        fvals = np.zeros(2)
        assert empirical_risk(ab, data, fvals) == pytest.approx(
            brute_force_risk(ab, data, fvals), rel=1e-15
        )
        assert empirical_risk(ab, data, fvals) == 0.5

    @pytest.mark.parametrize("family,params", ALL_FAMILIES[:6])
    def test_brute_force_oracle(self, rng, family, params):
        loss = build_loss(family, params)
        data = random_dataset(rng, n=9)
        fvals = rng.normal(size=9)
        assert empirical_risk(loss, data, fvals) == pytest.approx(
            brute_force_risk(loss, data, fvals), rel=1e-12
        )

    def test_weighted_brute_force(self, rng):
        loss = make_loss("logistic_pairwise", a=0.5)
        data = random_dataset(rng, n=8)
        w = rng.uniform(0.1, 1.0, size=8)
        w /= w.sum()
        fvals = rng.normal(size=8)
        assert empirical_risk(loss, data, fvals, weights=w) == pytest.approx(
            brute_force_risk(loss, data, fvals, weights=w), rel=1e-12
        )

    def test_permutation_invariance(self, rng):
        loss = make_loss("mee", h=1.0)
        data = random_dataset(rng, n=14)
        fvals = rng.normal(size=14)
        base = empirical_risk(loss, data, fvals)
        for _ in range(5):
            perm = rng.permutation(14)
            permuted = empirical_risk(loss, data.subset(perm), fvals[perm])
            assert permuted == pytest.approx(base, rel=1e-12)

    def test_length_mismatch(self, rng):
        data = random_dataset(rng, n=5)
        with pytest.raises(ValueError):
            empirical_risk(make_loss("squared"), data, np.zeros(4))

    def test_lipschitz_risk_bound(self, rng):
        # |R(f) - R(g)| <= 2 |L|_1 mean|f - g|
        loss = make_loss("logistic_pairwise", a=0.3)
        lip = loss.constants().lip
        data = random_dataset(rng, n=12)
        for _ in range(50):
            f = rng.normal(size=12)
            g = rng.normal(size=12)
            gap = abs(empirical_risk(loss, data, f) - empirical_risk(loss, data, g))
            assert gap <= 2.0 * lip * np.mean(np.abs(f - g)) + 1e-10

    def test_convexity_of_risk(self, rng):
        for family, params in [("logistic_pairwise", {"a": 0.5}), ("squared", {}),
                               ("absolute", {})]:
            loss = build_loss(family, params)
            data = random_dataset(rng, n=10)
            for _ in range(20):
                f, g = rng.normal(size=10), rng.normal(size=10)
                mid = empirical_risk(loss, data, 0.5 * (f + g))
                avg = 0.5 * empirical_risk(loss, data, f) + 0.5 * empirical_risk(
                    loss, data, g
                )
                assert mid <= avg + 1e-10


class TestShiftedRisk:
    def test_zero_fvals(self, rng):
        data = random_dataset(rng, n=7)
        loss = make_loss("mee", h=1.0)
        assert empirical_shifted_risk(loss, data, np.zeros(7)) == 0.0

    def test_difference_identity_exact(self, rng):
        data = random_dataset(rng, n=9)
        for family, params in ALL_FAMILIES[:5]:
            loss = build_loss(family, params)
            fvals = rng.normal(size=9)
            diff = empirical_risk(loss, data, fvals) - empirical_risk(
                loss, data, np.zeros(9)
            )
            assert empirical_shifted_risk(loss, data, fvals) == diff

    def test_common_shift_invariance_absolute(self):
        # rho((y-t) - (yt-tt)) depends only on differences, so shifting all
        # predictions by a constant leaves the shifted risk unchanged
        ab = make_loss("absolute")
        data = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
        r0 = empirical_shifted_risk(ab, data, np.zeros(2))
        r1 = empirical_shifted_risk(ab, data, np.full(2, 0.5))
        assert abs(r1 - r0) <= 1e-12

    def test_lipschitz_magnitude_bound(self, rng):
        # |R_shifted(f)| <= 2 |L|_1 mean|f|
        loss = make_loss("logistic_pairwise", a=0.2)
        data = random_dataset(rng, n=11)
        for _ in range(50):
            f = rng.normal(size=11) * 3
            val = empirical_shifted_risk(loss, data, f)
            assert abs(val) <= 2.0 * np.mean(np.abs(f)) + 1e-10


class TestRegularizedRisk:
    def test_zero_model(self, rng, gaussian):
        data = random_dataset(rng, n=8)
        model = RkhsFunction(np.zeros(8), data.xs, gaussian)
        loss = make_loss("logistic_pairwise", a=1.0)
        rep = regularized_risk(loss, data, model, lam=0.5)
        assert rep.regularized_risk == rep.risk
        assert rep.risk == empirical_risk(loss, data, np.zeros(8))
        assert rep.pair_count == 64

    def test_mee_range(self, rng, gaussian):
        data = random_dataset(rng, n=10)
        alpha = rng.normal(size=10)
        model = RkhsFunction(alpha, data.xs, gaussian)
        mee = make_loss("mee", h=1.0)
        lam = 0.3
        rep = regularized_risk(mee, data, model, lam=lam)
        gram = gram_matrix(gaussian, data.xs)
        assert 0.0 <= rep.regularized_risk <= 1.0 + lam * alpha @ gram @ alpha + 1e-12

    def test_recomposition_oracle(self, rng, gaussian):
        from pairlearn import evaluate, h_norm_sq

        data = random_dataset(rng, n=9)
        anchors = rng.normal(size=(4, 2))
        model = RkhsFunction(rng.normal(size=4), anchors, gaussian)
        loss = make_loss("logistic_pairwise", a=0.5)
        lam = 0.7
        rep = regularized_risk(loss, data, model, lam=lam, shifted=True)
        expected_risk = empirical_shifted_risk(loss, data, evaluate(model, data.xs))
        assert rep.risk == expected_risk
        assert rep.regularized_risk == pytest.approx(
            expected_risk + lam * h_norm_sq(model), rel=1e-14
        )

    def test_invalid_lambda(self, rng, gaussian):
        data = random_dataset(rng, n=5)
        model = RkhsFunction(np.zeros(5), data.xs, gaussian)
        with pytest.raises(ValueError):
            regularized_risk(make_loss("squared"), data, model, lam=0.0)


def brute_force_gradient(loss, data, gram, alpha, step=1e-7):
    """Oracle: per-coefficient value gradient by looping over all pairs."""
    n = data.n
    fvals = gram @ alpha
    g = np.zeros(n)
    for m in range(n):
        for j in range(n):
            d5, _ = loss.grad(
                data.xs[m], data.ys[m], data.xs[j], data.ys[j], fvals[m], fvals[j]
            )
            g[m] += d5
        for i in range(n):
            _, d6 = loss.grad(
                data.xs[i], data.ys[i], data.xs[m], data.ys[m], fvals[i], fvals[m]
            )
            g[m] += d6
    return g / n**2


class TestRiskGradient:
    def test_zero_at_constant_targets(self, rng, gaussian):
        data = Dataset(rng.normal(size=(6, 2)), np.full(6, 1.5))
        gram = gram_matrix(gaussian, data.xs)
        for family, params in [("logistic_pairwise", {"a": 0.5}), ("mee", {"h": 1.0}),
                               ("squared", {})]:
            loss = build_loss(family, params)
            g, resid = risk_gradient_coeffs(loss, data, gram, np.zeros(6), lam=0.5)
            assert np.array_equal(g, np.zeros(6))
            assert np.array_equal(resid, np.zeros(6))

    def test_squared_closed_form(self, rng, gaussian):
        # g = -(4/n) C (y - G alpha), C = I - (1/n) 1 1'
        data = random_dataset(rng, n=10)
        gram = gram_matrix(gaussian, data.xs)
        alpha = rng.normal(size=10)
        g, _ = risk_gradient_coeffs(make_loss("squared"), data, gram, alpha, lam=1.0)
        r = data.ys - gram @ alpha
        expected = -(4.0 / 10) * (r - r.mean())
        assert g == pytest.approx(expected, rel=1e-12)
        assert g == pytest.approx(
            brute_force_gradient(make_loss("squared"), data, gram, alpha), rel=1e-10
        )

    @pytest.mark.parametrize("family,params", DIFFERENTIABLE_FAMILIES[:5])
    def test_brute_force_oracle(self, rng, gaussian, family, params):
        loss = build_loss(family, params)
        data = random_dataset(rng, n=7)
        gram = gram_matrix(gaussian, data.xs)
        alpha = rng.normal(size=7)
        g, resid = risk_gradient_coeffs(loss, data, gram, alpha, lam=0.25)
        assert g == pytest.approx(brute_force_gradient(loss, data, gram, alpha),
                                  rel=1e-9, abs=1e-12)
        assert resid == pytest.approx(g + 0.5 * alpha, rel=1e-12)

    def test_finite_difference_directional(self, rng, gaussian):
        # directional derivative of the regularized risk along a coefficient
        # direction e equals resid' G e
        loss = make_loss("logistic_pairwise", a=0.5)
        data = random_dataset(rng, n=8)
        gram = gram_matrix(gaussian, data.xs)
        alpha = rng.normal(size=8) * 0.3
        lam = 0.4

        def objective(a):
            return empirical_risk(loss, data, gram @ a) + lam * a @ gram @ a

        _, resid = risk_gradient_coeffs(loss, data, gram, alpha, lam=lam)
        step = 1e-6
        for _ in range(10):
            e = rng.normal(size=8)
            fd = (objective(alpha + step * e) - objective(alpha - step * e)) / (
                2 * step
            )
            assert fd == pytest.approx(resid @ gram @ e, rel=1e-5, abs=1e-9)

    def test_size_mismatch(self, rng, gaussian):
        data = random_dataset(rng, n=5)
        gram = gram_matrix(gaussian, data.xs)
        with pytest.raises(ValueError):
            risk_gradient_coeffs(make_loss("squared"), data, gram, np.zeros(4), 1.0)


class TestRiskHessian:
    def test_finite_difference_of_gradient(self, rng, gaussian):
        from pairlearn.risk import _risk_gradient_fvals, uniform_weights

        loss = make_loss("logistic_pairwise", a=0.5)
        data = random_dataset(rng, n=7)
        fvals = rng.normal(size=7)
        w = uniform_weights(7)
        hess = risk_hessian_coeffs(loss, data, fvals)
        step = 1e-6
        for q in range(7):
            e = np.zeros(7)
            e[q] = step
            fd = (
                _risk_gradient_fvals(loss, data.ys, fvals + e, w)
                - _risk_gradient_fvals(loss, data.ys, fvals - e, w)
            ) / (2 * step)
            assert hess[:, q] == pytest.approx(fd, rel=1e-5, abs=1e-9)

    def test_symmetry_and_psd(self, rng):
        loss = make_loss("logistic_pairwise", a=0.3)
        data = random_dataset(rng, n=9)
        hess = risk_hessian_coeffs(loss, data, rng.normal(size=9))
        assert np.max(np.abs(hess - hess.T)) <= 1e-15
        assert np.linalg.eigvalsh(hess).min() >= -1e-12

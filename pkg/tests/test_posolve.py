"""Direct-solver tests: closed forms vs first-order oracles, error formulas
vs Monte-Carlo."""

import numpy as np
import pytest

from gminmax.covariance import CovarianceSpec, PsdMatrix, build
from gminmax.datagen import gen_correlated_means, gen_gmm, gen_regression
from gminmax.losses import ABS, HALF_SQ
from gminmax.posolve import (
    classification_error,
    closed_form_gen_error,
    empirical_gen_error,
    qfunc,
    solve_gmm_classifier,
    solve_ridge_multisource,
    solve_separable_pgd,
    training_error,
)

ISO = lambda d: build(CovarianceSpec("isotropic", d, sigma_base=1.0))  # noqa: E731


def make_ds(k=2, n=40, d=20, noise=(0.1, 0.2), seed=0, sigma_base=0.6):
    specs = [
        CovarianceSpec("spiked", d, sigma_base=sigma_base, spike_sigma=1.0)
        for _ in range(k)
    ]
    return gen_regression(k, n, d, specs, list(noise[:k]), np.ones(d), seed=seed)


class TestRidge:
    def test_noiseless_interpolation(self):
        ds = gen_regression(
            2, 30, 20,
            [CovarianceSpec("isotropic", 20, sigma_base=1.0)] * 2,
            [0.0, 0.0], np.arange(20, dtype=float) / 5, seed=1,
        )
        fit = solve_ridge_multisource(ds, 1e-10)
        np.testing.assert_allclose(fit.theta_hat, ds.theta_star, atol=1e-6)

    def test_huge_lambda_kills_theta(self):
        ds = make_ds(seed=2)
        fit = solve_ridge_multisource(ds, 1e10)
        assert np.linalg.norm(fit.theta_hat) <= 1e-6

    def test_normal_equation_residual(self):
        ds = make_ds(seed=3)
        fit = solve_ridge_multisource(ds, 0.7)
        assert fit.solver_meta["residual"] <= 1e-8

    def test_optimality_vs_truth(self):
        # objective at the solution is no worse than at theta_star
        ds = make_ds(seed=4)
        lam = 0.5
        fit = solve_ridge_multisource(ds, lam)

        def objective(theta):
            return training_error(ds, theta) + lam / (2 * ds.d) * float(theta @ theta)

        assert objective(fit.theta_hat) <= objective(ds.theta_star) + 1e-12


class TestProximalGradient:
    def test_matches_ridge_closed_form(self):
        for seed in range(5):
            ds = make_ds(k=2, n=50, d=25, seed=seed)
            lam = 1.0
            exact = solve_ridge_multisource(ds, lam)
            pgd = solve_separable_pgd(
                ds, [HALF_SQ] * 2, HALF_SQ, lam, max_iters=20000, tol=1e-11
            )
            assert np.abs(pgd.theta_hat - exact.theta_hat).max() <= 1e-6

    def test_zero_data(self):
        ds = make_ds(k=1, n=10, d=5, noise=(0.0,), seed=5)
        for l in range(ds.k):
            ds.X_list[l][:] = 0.0
            ds.y_list[l][:] = 0.0
        fit = solve_separable_pgd(ds, [HALF_SQ], HALF_SQ, 1.0)
        np.testing.assert_allclose(fit.theta_hat, np.zeros(5), atol=1e-12)

    def test_abs_loss_large_lambda(self):
        ds = make_ds(k=1, n=20, d=8, noise=(0.1,), seed=6)
        fit = solve_separable_pgd(ds, [ABS], HALF_SQ, 1e10, max_iters=2000, tol=1e-8)
        assert np.linalg.norm(fit.theta_hat) <= 1e-6

    def test_non_convergence_warns_with_residual(self):
        ds = make_ds(k=2, n=30, d=15, seed=7)
        with pytest.warns(RuntimeWarning, match="gradient-mapping"):
            fit = solve_separable_pgd(
                ds, [HALF_SQ] * 2, HALF_SQ, 0.3, max_iters=500, tol=0.0
            )
        assert not fit.solver_meta["converged"]  # tol=0 cannot be reached
        assert fit.solver_meta["residual"] < 1.0


class TestGenError:
    def test_closed_form_truth_is_noise(self):
        covs = [ISO(6), ISO(6)]
        theta = np.ones(6)
        val = closed_form_gen_error(theta, theta, covs, [0.1, 0.3])
        assert val == pytest.approx((0.01 + 0.09) / 4)

    def test_closed_form_identity_shift(self):
        covs = [ISO(8)]
        val = closed_form_gen_error(np.ones(8), np.zeros(8), covs, [0.5])
        assert val == pytest.approx((0.25 + 1.0) / 2)

    def test_empirical_matches_truth_noise_only(self):
        ds = make_ds(k=2, n=30, d=10, seed=8)
        fit = solve_ridge_multisource(ds, 1.0)
        fit.theta_hat = ds.theta_star.copy()
        mean, stderr = empirical_gen_error(fit, ds, ds.theta_star, 20000, seed=9)
        expected = (0.01 + 0.04) / 4
        assert abs(mean - expected) <= 2 * stderr

    def test_empirical_matches_closed_form(self):
        ds = make_ds(k=2, n=40, d=12, seed=10)
        fit = solve_ridge_multisource(ds, 0.5)
        mean, stderr = empirical_gen_error(fit, ds, ds.theta_star, 10000, seed=11)
        exact = closed_form_gen_error(fit.theta_hat, ds.theta_star, ds.covariances, ds.noise_sigmas)
        assert abs(mean - exact) <= 2 * stderr

    def test_small_test_set_rejected(self):
        ds = make_ds(seed=12)
        fit = solve_ridge_multisource(ds, 1.0)
        with pytest.raises(Exception, match="n_test"):
            empirical_gen_error(fit, ds, ds.theta_star, 50, seed=0)


class TestGmmClassifier:
    def test_separable_means(self):
        d = 5
        zero = PsdMatrix.from_dense(np.zeros((d, d)))
        e1 = np.zeros(d)
        e1[0] = 1.0
        ds = gen_gmm(10, d, e1, -e1, zero, zero, seed=1)
        fit = solve_gmm_classifier(ds, 1e-10)
        direction = fit.w_hat / np.linalg.norm(fit.w_hat)
        np.testing.assert_allclose(np.abs(direction), np.abs(e1), atol=1e-6)
        assert np.all(np.sign(ds.data @ fit.w_hat) == ds.labels)

    def test_huge_lambda(self):
        ds = gen_gmm(20, 6, np.ones(6), -np.ones(6), ISO(6), ISO(6), seed=2)
        fit = solve_gmm_classifier(ds, 1e10)
        assert np.linalg.norm(fit.w_hat) <= 1e-6

    def test_objective_matches_gradient_descent_oracle(self):
        d, n = 30, 24
        mu1, mu2 = gen_correlated_means(d, 0.5, seed=3)
        c1 = build(CovarianceSpec("spiked", d, sigma_base=1.0, spike_sigma=2.0), rng_seed=4)
        c2 = build(CovarianceSpec("spiked", d, sigma_base=1.5, spike_sigma=2.0), rng_seed=5)
        ds = gen_gmm(n, d, mu1, mu2, c1, c2, seed=6)
        lam = 50.0
        fit = solve_gmm_classifier(ds, lam)
        # plain projected (unconstrained) gradient descent on the objective
        b, z = ds.data, ds.labels
        lip = 2 * (np.linalg.norm(b, 2) ** 2 + lam)
        w = np.zeros(d)
        for _ in range(20000):
            grad = 2 * b.T @ (b @ w - z) + 2 * lam * w
            w = w - grad / lip
        oracle_obj = float(np.sum((b @ w - z) ** 2) + lam * w @ w)
        assert fit.objective_value == pytest.approx(oracle_obj, rel=1e-6)
        assert fit.objective_value <= oracle_obj + 1e-9


class TestClassificationError:
    def test_orthogonal_direction(self):
        d = 4
        w = np.array([0.0, 0.0, 0.0, 1.0])
        mu1 = np.array([1.0, 0, 0, 0])
        assert classification_error(w, mu1, -mu1, ISO(d), ISO(d)) == pytest.approx(0.5)

    def test_aligned_classifier(self):
        d = 100
        mu = np.full(d, 1.0)  # ||mu|| = sqrt(d)
        err = classification_error(mu, mu, -mu, ISO(d), ISO(d))
        assert err == pytest.approx(float(qfunc(np.sqrt(d))), rel=1e-10)
        assert err < 1e-20

    def test_scale_invariance(self):
        rng = np.random.default_rng(7)
        d = 12
        w = rng.standard_normal(d)
        mu1, mu2 = rng.standard_normal((2, d))
        c1 = PsdMatrix.from_dense(np.eye(d) * 2)
        c2 = PsdMatrix.from_dense(np.eye(d) * 0.5)
        base = classification_error(w, mu1, mu2, c1, c2)
        for c in (0.1, 3.0, 1e4):
            assert classification_error(c * w, mu1, mu2, c1, c2) == pytest.approx(base)

    def test_matches_monte_carlo(self):
        d = 40
        rng = np.random.default_rng(8)
        mu1, mu2 = gen_correlated_means(d, 0.8, seed=9)
        c1 = build(CovarianceSpec("spiked", d, sigma_base=5.0, spike_sigma=15.0), rng_seed=10)
        c2 = build(CovarianceSpec("spiked", d, sigma_base=5.0, spike_sigma=15.0), rng_seed=11)
        w = rng.standard_normal(d)
        exact = classification_error(w, mu1, mu2, c1, c2)
        n_mc = 100_000
        wrong = 0
        for mu, cov, label in ((mu1, c1, 1.0), (mu2, c2, -1.0)):
            x = rng.standard_normal((n_mc // 2, d)) @ cov.sqrt() + mu
            wrong += int(np.sum(np.sign(x @ w) != label))
        err_mc = wrong / n_mc
        stderr = np.sqrt(exact * (1 - exact) / n_mc)
        assert abs(exact - err_mc) <= 3 * stderr

    def test_degenerate_direction(self):
        d = 3
        zero = PsdMatrix.from_dense(np.zeros((d, d)))
        w = np.array([1.0, 0.0, 0.0])
        # mu^T w != 0: terms collapse to indicator values
        err = classification_error(w, w, -w, zero, zero)
        assert err == pytest.approx(0.0)
        with pytest.raises(ValueError, match="degenerate"):
            classification_error(w, np.array([0, 1.0, 0]), np.array([0, 1.0, 0]), zero, zero)

    def test_zero_w_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            classification_error(np.zeros(3), np.ones(3), np.ones(3), ISO(3), ISO(3))

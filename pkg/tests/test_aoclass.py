"""Auxiliary-classification tests.

Oracles: an independently coded scalar collapse of the trace objective for
isotropic covariances, the exact dense/spiked equivalence at matched
orthogonal spikes, the error-formula identity with the exact test error,
and the general-objective specialization at the squared-loss saddle.
"""

import numpy as np
import pytest

from gminmax.aoclass import (
    AoClassParams,
    ClassAoSpec,
    ao_class_objective_general,
    ao_class_objective_l2,
    ao_class_objective_spiked,
    general_params_from_l2,
    predicted_class_error,
    solve_ao_class,
)
from gminmax.covariance import PsdMatrix
from gminmax.posolve import classification_error, qfunc
from gminmax.rngstreams import stream


def params(tau, beta, gamma):
    return AoClassParams(tau=np.asarray(tau, float), beta=np.asarray(beta, float),
                         gamma=np.asarray(gamma, float))


def scalar_isotropic_objective(n, d, lam, r, s0, tau, beta, gamma):
    """Independent scalar form of the trace objective for Sigma_i = s0^2 I."""
    w1, w2 = n * beta[0] / (4 * tau[0]), n * beta[1] / (4 * tau[1])
    denom = lam + (w1 + w2) * s0**2
    numer = (
        n**2 * beta[0] * beta[1] * gamma[0] * gamma[1] * r / (8 * tau[0] * tau[1])
        + (beta[0] ** 2 + beta[1] ** 2) * s0**2
        + n**2 * (beta[0] ** 2 * gamma[0] ** 2 + beta[1] ** 2 * gamma[1] ** 2) / (16 * tau[0] ** 2)
    )
    total = -0.25 * d * numer / denom
    for i, sign in ((0, 1.0), (1, -1.0)):
        total += (
            beta[i] * tau[i] / 2
            - n * beta[i] * gamma[i] ** 2 / (16 * tau[i])
            - n * beta[i] * gamma[i] * sign / (4 * tau[i])
            - beta[i] ** 2 / 4
        )
    return total


def dense_spec(n, d, lam, r, mats, **kw):
    return ClassAoSpec(n=n, d=d, lam=lam, r=r, kind="dense",
                       dense=(PsdMatrix.from_dense(mats[0]), PsdMatrix.from_dense(mats[1])), **kw)


class TestObjectives:
    def test_beta_zero_is_zero(self):
        p = params([1.0, 2.0], [0.0, 0.0], [0.3, -0.4])
        spec = ClassAoSpec(n=4, d=5, lam=1.0, r=0.5, sigma1=1.0, sigma2=2.0, sigma=0.5)
        assert ao_class_objective_spiked(spec, p) == pytest.approx(0.0)
        spec_d = dense_spec(4, 5, 1.0, 0.5, [np.eye(5), 2 * np.eye(5)])
        assert ao_class_objective_l2(spec_d, p) == pytest.approx(0.0)

    def test_scalar_collapse_oracle(self):
        # equal tau_i^2 case collapses the trace to d * scalar
        n, d, lam, r, s0 = 4, 3, 1.0, 0.6, 1.3
        p = params([1.0, 1.0], [1.0, 1.0], [0.1, -0.1])
        spec = dense_spec(n, d, lam, r, [s0**2 * np.eye(d), s0**2 * np.eye(d)])
        want = scalar_isotropic_objective(n, d, lam, r, s0, p.tau, p.beta, p.gamma)
        assert ao_class_objective_l2(spec, p) == pytest.approx(want, rel=1e-12)
        # the tau_i's appear separately in the I-coefficients; vary them too
        p2 = params([1.0, 2.0], [0.5, 1.5], [0.1, -0.3])
        w1, w2 = n * p2.beta[0] / (4 * p2.tau[0]), n * p2.beta[1] / (4 * p2.tau[1])
        numer = (
            n**2 * p2.beta[0] * p2.beta[1] * p2.gamma[0] * p2.gamma[1] * r
            / (8 * p2.tau[0] * p2.tau[1])
            + (p2.beta[0] ** 2 + p2.beta[1] ** 2) * s0**2
            + n**2 * p2.beta[0] ** 2 * p2.gamma[0] ** 2 / (16 * p2.tau[0] ** 2)
            + n**2 * p2.beta[1] ** 2 * p2.gamma[1] ** 2 / (16 * p2.tau[1] ** 2)
        )
        tail = 0.0
        for i, sign in ((0, 1.0), (1, -1.0)):
            tail += (
                p2.beta[i] * p2.tau[i] / 2
                - n * p2.beta[i] * p2.gamma[i] ** 2 / (16 * p2.tau[i])
                - n * p2.beta[i] * p2.gamma[i] * sign / (4 * p2.tau[i])
                - p2.beta[i] ** 2 / 4
            )
        want2 = -0.25 * d * numer / (lam + (w1 + w2) * s0**2) + tail
        assert ao_class_objective_l2(spec, p2) == pytest.approx(want2, rel=1e-12)

    def test_spiked_sigma_zero_equals_isotropic_dense(self):
        n, d, lam, r = 6, 3, 2.0, 0.4
        spec_s = ClassAoSpec(n=n, d=d, lam=lam, r=r, sigma1=1.1, sigma2=0.7, sigma=0.0)
        spec_d = dense_spec(n, d, lam, r, [1.1**2 * np.eye(d), 0.7**2 * np.eye(d)])
        rng = stream(5, "sigma_zero")
        for _ in range(10):
            tau = np.exp(rng.uniform(-0.5, 1.5, 2))
            beta = np.exp(rng.uniform(-1, 1, 2))
            gamma = rng.uniform(-1, 1, 2)
            p = params(tau, beta, gamma)
            assert ao_class_objective_spiked(spec_s, p) == pytest.approx(
                ao_class_objective_l2(spec_d, p), rel=1e-12
            )

    def test_dense_trace_oracle_matched_spikes(self):
        # explicit orthogonal spikes with ||nu_i||^2 = sigma^2 d reproduce
        # the three-resolvent closed form exactly
        n, d, lam, r = 8, 12, 3.0, 0.5
        sigma1, sigma2, sigma = 1.2, 0.9, 2.0
        nu1 = np.zeros(d); nu1[0] = sigma * np.sqrt(d)
        nu2 = np.zeros(d); nu2[1] = sigma * np.sqrt(d)
        mats = [sigma1**2 * np.eye(d) + np.outer(nu1, nu1),
                sigma2**2 * np.eye(d) + np.outer(nu2, nu2)]
        spec_d = dense_spec(n, d, lam, r, mats)
        spec_s = ClassAoSpec(n=n, d=d, lam=lam, r=r, sigma1=sigma1, sigma2=sigma2, sigma=sigma)
        rng = stream(6, "matched_spikes")
        for _ in range(20):
            p = params(np.exp(rng.uniform(-0.5, 1.5, 2)),
                       np.exp(rng.uniform(-1, 1, 2)),
                       rng.uniform(-1, 1, 2))
            a = ao_class_objective_spiked(spec_s, p)
            b = ao_class_objective_l2(spec_d, p)
            assert a == pytest.approx(b, rel=1e-8)

    def test_domain_errors(self):
        spec = ClassAoSpec(n=4, d=2, lam=1.0, r=0.0, sigma1=1.0, sigma2=1.0, sigma=1.0)
        p = params([1.0, 1.0], [1.0, 1.0], [0.0, 0.0])
        with pytest.raises(ValueError, match="d >= 3"):
            ao_class_objective_spiked(spec, p)
        with pytest.raises(ValueError, match="tau"):
            AoClassParams(tau=np.array([0.0, 1.0]), beta=np.ones(2), gamma=np.zeros(2))


class TestPredictedError:
    def test_direct_substitution(self):
        n = 16
        p = params([np.sqrt(n / 8.0)] * 2, [1.0, 1.0], [0.0, 0.0])
        assert predicted_class_error(p, n) == pytest.approx(float(qfunc(2.0)), rel=1e-12)
        assert predicted_class_error(p, n) == pytest.approx(0.02275, abs=2e-5)

    def test_gamma_at_two(self):
        p = params([10.0, 10.0], [1.0, 1.0], [-2.0, 2.0])
        assert predicted_class_error(p, 16) == pytest.approx(0.5)

    def test_non_positive_radicand(self):
        p = params([1.0, 1.0], [1.0, 1.0], [5.0, 0.0])
        with pytest.raises(ValueError, match="class 1"):
            predicted_class_error(p, 16)

    def test_identity_with_exact_error(self):
        # gamma_i = 2(mu_i.w -+ 1), tau_i^2 = (n/2)(gamma^2/4 + w.Sigma_i w)
        # turn the saddle formula into the exact error of the direction w
        rng = stream(7, "identity_oracle")
        n, d = 20, 9
        for _ in range(10):
            w = rng.standard_normal(d)
            mu1 = rng.standard_normal(d)
            mu2 = rng.standard_normal(d)
            a1 = rng.standard_normal((d, d))
            a2 = rng.standard_normal((d, d))
            c1 = PsdMatrix.from_dense(a1 @ a1.T / d)
            c2 = PsdMatrix.from_dense(a2 @ a2.T / d)
            gamma = np.array([2 * (mu1 @ w - 1.0), 2 * (mu2 @ w + 1.0)])
            tau = np.sqrt(
                n / 2.0 * (gamma**2 / 4.0 + np.array([w @ c1.entries @ w, w @ c2.entries @ w]))
            )
            p = params(tau, [1.0, 1.0], gamma)
            want = classification_error(w, mu1, mu2, c1, c2)
            assert predicted_class_error(p, n) == pytest.approx(want, rel=1e-10)

    def test_in_unit_interval(self):
        rng = stream(8, "interval")
        for _ in range(50):
            tau = np.exp(rng.uniform(-0.5, 2, 2))
            n = 12
            box = 2 * np.sqrt(2) * tau / np.sqrt(n)
            gamma = rng.uniform(-0.99, 0.99, 2) * box
            p = params(tau, np.exp(rng.uniform(-1, 1, 2)), gamma)
            err = predicted_class_error(p, n)
            assert 0.0 <= err <= 1.0


def concentrated_general_objective(spec, gp, r_corr):
    """Concentrated general-loss objective for sq loss/penalty."""
    n, d, lam = spec.n, spec.d, spec.lam
    s1, s2 = (m.entries for m in spec.dense)
    sig_bar = gp.zeta[0] / gp.theta[0] * s1 + gp.zeta[1] / gp.theta[1] * s2
    cbar = (
        gp.beta[0] ** 2 * s1
        + gp.beta[1] ** 2 * s2
        + (gp.eta[0] ** 2 + gp.eta[1] ** 2 + 2 * gp.eta[0] * gp.eta[1] * r_corr) * np.eye(d)
    )
    total = -0.5 * np.trace(np.linalg.solve(2 * lam * np.eye(d) + sig_bar, cbar))
    for i, sign in ((0, 1.0), (1, -1.0)):
        t = gp.tau[i] / gp.beta[i]
        arg_sq = (n / 2.0) * ((gp.gamma[i] - sign) ** 2 + gp.theta[i] ** 2)
        total += gp.beta[i] * gp.tau[i] / 2.0 + arg_sq / (1 + 2 * t)
        total += -gp.theta[i] * gp.zeta[i] / 2.0 - gp.eta[i] * gp.gamma[i]
    return total


class TestGeneralObjective:
    def make_spec(self, n=16, d=10, lam=2.5, r=0.6, seed=9):
        rng = stream(seed, "general_spec")
        a = rng.standard_normal((d, d))
        mat = a @ a.T / d + 0.5 * np.eye(d)
        return dense_spec(n, d, lam, r, [mat, mat])

    def test_beta_eta_zero(self):
        spec = self.make_spec()
        p = AoClassParams(
            tau=np.array([1.0, 2.0]), beta=np.zeros(2), gamma=np.array([0.5, -0.5]),
            theta=np.array([0.7, 0.9]), zeta=np.array([1.1, 1.3]), eta=np.zeros(2),
        )
        rng = stream(10, "draws")
        draws = [{
            "g": rng.standard_normal((2, spec.d)),
            "h": rng.standard_normal((2, spec.n // 2)),
            "mu": rng.standard_normal((2, spec.d)),
        }]
        got = ao_class_objective_general(spec, p, draws=draws)
        want = -0.5 * float(np.sum(p.theta * p.zeta))
        assert got == pytest.approx(want, abs=1e-12)

    def test_matched_gamma_kills_envelope(self):
        # gamma_i 1 = z_i and theta -> 0 leave the envelope at 0
        from gminmax.losses import SQ

        assert SQ.envelope(0.5, np.zeros(8)) == 0.0
        spec = self.make_spec()
        p = AoClassParams(
            tau=np.array([1.0, 1.0]), beta=np.array([2.0, 2.0]),
            gamma=np.array([1.0, -1.0]),
            theta=np.array([1e-9, 1e-9]), zeta=np.array([1.0, 1.0]),
            eta=np.array([0.0, 0.0]),
        )
        draws = [{
            "g": np.zeros((2, spec.d)),
            "h": stream(11, "h").standard_normal((2, spec.n // 2)),
            "mu": np.zeros((2, spec.d)),
        }]
        got = ao_class_objective_general(spec, p, draws=draws)
        # envelope arguments are O(theta) = O(1e-9); only the explicit
        # tau/zeta terms survive
        want = float(np.sum(p.beta * p.tau / 2 - p.theta * p.zeta / 2))
        assert got == pytest.approx(want, abs=1e-6)

    def test_specialization_matches_l2_saddle(self):
        n, d, lam, r = 16, 10, 2.5, 0.6
        spec = self.make_spec(n, d, lam, r)
        p8, value8 = solve_ao_class(spec)
        gp = general_params_from_l2(spec, p8)
        # concentrated identity is exact at the mapped parameters
        conc = concentrated_general_objective(spec, gp, r)
        assert conc == pytest.approx(value8, rel=1e-7)
        # sampled objective concentrates to the squared-loss value
        rng = stream(12, "spec_draws")
        vals = []
        for _ in range(50):
            mu1 = rng.standard_normal(d)
            mu2 = r * mu1 + np.sqrt(1 - r**2) * rng.standard_normal(d)
            draw = {
                "g": rng.standard_normal((2, d)),
                "h": rng.standard_normal((2, n // 2)),
                "mu": np.vstack([mu1, mu2]),
            }
            vals.append(ao_class_objective_general(spec, gp, draws=[draw]))
        vals = np.array(vals)
        stderr = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - value8) <= 2 * stderr


class TestSolver:
    def test_unreduced_recovers_symmetry(self):
        spec_sym = ClassAoSpec(
            n=40, d=50, lam=5.0, r=0.5, sigma1=2.0, sigma2=2.0, sigma=2.0,
            symmetry_reduction=True,
        )
        p_sym, v_sym = solve_ao_class(spec_sym)
        spec_full = ClassAoSpec(
            n=40, d=50, lam=5.0, r=0.5, sigma1=2.0, sigma2=2.0, sigma=2.0,
            symmetry_reduction=False,
        )
        p_full, v_full = solve_ao_class(spec_full)
        assert abs(p_full.tau[0] - p_full.tau[1]) <= 1e-3 * p_full.tau[0]
        assert abs(p_full.gamma[0] + p_full.gamma[1]) <= 1e-3
        assert v_full == pytest.approx(v_sym, abs=1e-4 * max(1, abs(v_sym)))

    def test_infinite_regularization_degenerates(self):
        # the implied solution norm w.Sigma w = 2 tau^2/n - gamma^2/4 -> 0
        # and the predicted error -> 1/2; the dual scale beta stays at its
        # exact w = 0 value 2 ||z_block|| = sqrt(2n)
        n = 40
        spec = ClassAoSpec(
            n=n, d=50, lam=1e9, r=0.5, sigma1=2.0, sigma2=2.0, sigma=2.0
        )
        p, _ = solve_ao_class(spec)
        err = predicted_class_error(p, n)
        implied_w_norm_sq = 2 * p.tau[0] ** 2 / n - p.gamma[0] ** 2 / 4
        assert implied_w_norm_sq <= 1e-2
        assert 0.45 <= err <= 0.5 + 1e-9
        assert p.beta[0] == pytest.approx(np.sqrt(2 * n), rel=1e-2)

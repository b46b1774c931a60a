"""Scalar auxiliary optimization for multi-source regression.

The high-dimensional ridge problem is predicted by a 4k-variable saddle
problem over (xi, q) (min) and (beta, r) (max).  With half_sq losses and a
ridge penalty the random terms concentrate, giving the deterministic
objective (S = sum_l (r_l/xi_l) Sigma_l, A = S/k, R = (lam I + A)^{-1}):

    F = sum_l [ beta_l q_l/(2k) - xi_l r_l/(2k)
                + (beta_l / (2k (beta_l+q_l))) (sigma_l^2 + xi_l^2) ]
        + (lam/2d) theta*^T A R A-complement ... = (lam/2d) theta*^T (I - lam R) theta*
        - (1/2k^2) sum_l (beta_l^2/n) Tr[Sigma_l R]

Normalization notes (resolved against the k=1 isotropic oracle and the
direct-solver Monte-Carlo):
  * the envelope term carries the 1/(nk) prefactor of the stochastic
    objective (its concentration is (1/2k)(beta/(beta+q))(sigma^2+xi^2));
  * the trace term carries 1/(2 k^2), the constant produced by completing
    the square in b, not the 1/k^2 that appears in one display;
  * the sampled objective below uses the same trace constant so its
    expectation equals the concentrated objective exactly.

At the saddle, xi_l^2 estimates (1/d)(theta_hat - theta*)^T Sigma_l
(theta_hat - theta*), which is why the predicted generalization error also
equals (1/2k) sum_l (sigma_l^2 + xi_l^2).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .covariance import PsdMatrix
from .losses import HALF_SQ, MatrixScaledQuadEnvelope, SeparableLoss, quad_matrix_envelope
from .rngstreams import stream

__all__ = [
    "AoRegressionParams",
    "AoProblemSpec",
    "AoRegressionSolution",
    "AoSolverConfig",
    "build_A",
    "ao_objective_concentrated_l2",
    "ao_objective_sampled",
    "solve_ao_regression",
    "predict_gen_error",
    "predicted_train_error",
    "predict_theta_hat",
]


@dataclass
class AoRegressionParams:
    """Saddle variables: (xi, q) minimized, (beta, r) maximized, all >= 0."""

    xi: np.ndarray
    q: np.ndarray
    beta: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        for name in ("xi", "q", "beta", "r"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if np.any(arr < 0):
                raise ValueError(f"{name} must be element-wise non-negative")
            setattr(self, name, arr)

    @classmethod
    def ones(cls, k: int) -> "AoRegressionParams":
        return cls(np.ones(k), np.ones(k), np.ones(k), np.ones(k))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.xi, self.q, self.beta, self.r])

    @classmethod
    def from_vector(cls, v: np.ndarray, k: int) -> "AoRegressionParams":
        return cls(v[:k], v[k : 2 * k], v[2 * k : 3 * k], v[3 * k :])


@dataclass
class AoProblemSpec:
    """Deterministic data of the scalar problem: sizes, covariances, noise,
    signal, and the ridge strength."""

    k: int
    n: int
    d: int
    covariances: list[PsdMatrix]
    noise_sigmas: np.ndarray
    theta_star: np.ndarray
    lam: float

    def __post_init__(self):
        if len(self.covariances) != self.k:
            raise ValueError(f"need {self.k} covariances")
        self.noise_sigmas = np.asarray(self.noise_sigmas, dtype=float)
        self.theta_star = np.asarray(self.theta_star, dtype=float)
        if self.noise_sigmas.shape != (self.k,):
            raise ValueError(f"need {self.k} noise sigmas")
        if self.theta_star.shape != (self.d,):
            raise ValueError(f"theta_star must have length {self.d}")
        if any(c.dim != self.d for c in self.covariances):
            raise ValueError("covariance dimensions must equal d")
        if self.lam <= 0:
            raise ValueError("lam must be positive")


@dataclass
class AoRegressionSolution:
    params: AoRegressionParams
    objective: float
    predicted_gen_error: float
    predicted_train_error: float
    predicted_theta_hat: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)


def build_A(spec: AoProblemSpec, params: AoRegressionParams) -> PsdMatrix:
    """A(r, xi) = (1/k) sum_l (r_l / xi_l) Sigma_l."""
    if np.any(params.xi <= 0):
        raise ValueError("all xi must be strictly positive to form A(r, xi)")
    a = np.zeros((spec.d, spec.d))
    for l in range(spec.k):
        a += (params.r[l] / params.xi[l]) * spec.covariances[l].entries
    return PsdMatrix.from_dense(a / spec.k)


class _ResolventCache:
    """Quantities of R = (lam I + (1/k) sum s_l Sigma_l)^{-1} keyed by s.

    Exposes theta*^T R theta* and Tr[Sigma_l R].  When every covariance is
    a recorded rank-one spike (base^2 I + nu nu^T) the k x k Woodbury
    identity replaces the dense factorization; both backends agree to
    rounding and are cross-checked in the tests.
    """

    def __init__(self, spec: AoProblemSpec):
        self.spec = spec
        self._memo: dict[tuple, tuple[float, np.ndarray]] = {}
        lr = [c.low_rank for c in spec.covariances]
        self.fast = all(x is not None for x in lr)
        if self.fast:
            self.base = np.array([x[0] for x in lr])
            self.V = np.column_stack([x[1] for x in lr])  # d x k
            self.P = self.V.T @ self.V
            self.vt_theta = self.V.T @ spec.theta_star
            self.theta_sq = float(spec.theta_star @ spec.theta_star)

    def query(self, s: np.ndarray) -> tuple[float, np.ndarray]:
        key = tuple(float(x) for x in s)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        result = self._fast_query(s) if self.fast else self._dense_query(s)
        if len(self._memo) > 64:
            self._memo.clear()
        self._memo[key] = result
        return result

    def _dense_query(self, s: np.ndarray) -> tuple[float, np.ndarray]:
        spec = self.spec
        m = spec.lam * np.eye(spec.d)
        for l in range(spec.k):
            m += (s[l] / spec.k) * spec.covariances[l].entries
        c, low = scipy.linalg.cho_factor(m, check_finite=False)
        r_theta = scipy.linalg.cho_solve((c, low), spec.theta_star, check_finite=False)
        tq = float(spec.theta_star @ r_theta)
        r_full = scipy.linalg.cho_solve((c, low), np.eye(spec.d), check_finite=False)
        traces = np.array(
            [np.vdot(spec.covariances[l].entries, r_full) for l in range(spec.k)]
        )
        return tq, traces

    def _fast_query(self, s: np.ndarray) -> tuple[float, np.ndarray]:
        spec = self.spec
        k = spec.k
        c = spec.lam + float(np.dot(s, self.base)) / k
        d_diag = s / k
        # Guard vanished weights: a zero s_l contributes nothing to A.
        active = d_diag > 0
        if not np.any(active):
            tq = self.theta_sq / c
            trace_id = spec.d / c
            traces = self.base * trace_id + np.einsum("ii->i", self.P) / c
            return tq, traces
        pa = self.P[np.ix_(active, active)]
        w = np.diag(1.0 / d_diag[active]) + pa / c
        w_inv = np.linalg.inv(w)
        ta = self.vt_theta[active]
        tq = (self.theta_sq - ta @ w_inv @ ta / c) / c
        trace_id = (spec.d - np.trace(w_inv @ pa) / c) / c
        pcols = self.P[np.ix_(active, np.arange(k))]  # active x k
        nu_quad = (np.einsum("ii->i", self.P) - np.einsum("ji,jk,ki->i", pcols, w_inv, pcols) / c) / c
        traces = self.base * trace_id + nu_quad
        return tq, traces

    def second_order(self, s: np.ndarray) -> dict:
        """Resolvent statistics used by the saddle system and gen error:
        tq, traces, C[m, l] = Tr[Sigma_m R Sigma_l R], and
        g[l] = (lam^2/d) theta*^T R Sigma_l R theta*."""
        spec = self.spec
        k = spec.k
        if not self.fast:
            m = spec.lam * np.eye(spec.d)
            for l in range(k):
                m += (s[l] / k) * spec.covariances[l].entries
            cf = scipy.linalg.cho_factor(m, check_finite=False)
            r_full = scipy.linalg.cho_solve(cf, np.eye(spec.d), check_finite=False)
            r_theta = r_full @ spec.theta_star
            tq = float(spec.theta_star @ r_theta)
            traces = np.array(
                [np.vdot(spec.covariances[l].entries, r_full) for l in range(k)]
            )
            bmats = [r_full @ cov.entries @ r_full for cov in spec.covariances]
            cmat = np.array(
                [
                    [np.vdot(spec.covariances[m_].entries, bmats[l]) for l in range(k)]
                    for m_ in range(k)
                ]
            )
            g = np.array(
                [
                    spec.lam**2 / spec.d * float(r_theta @ (cov.entries @ r_theta))
                    for cov in spec.covariances
                ]
            )
            return {"tq": tq, "traces": traces, "C": cmat, "g": g}
        c = spec.lam + float(np.dot(s, self.base)) / k
        d_diag = s / k
        active = d_diag > 0
        p = self.P
        t_star = self.vt_theta
        if np.any(active):
            pa = p[np.ix_(active, active)]
            w = np.diag(1.0 / d_diag[active]) + pa / c
            e = np.linalg.inv(w)
            pact = p[:, active]  # k x a
            ta = t_star[active]
            vrv = (p - pact @ e @ pact.T / c) / c
            vr2v = (
                p
                - 2.0 * pact @ e @ pact.T / c
                + pact @ e @ pa @ e @ pact.T / c**2
            ) / c**2
            tr_r = (spec.d - np.trace(e @ pa) / c) / c
            tr_r2 = (
                spec.d - 2.0 * np.trace(e @ pa) / c + np.trace(e @ pa @ e @ pa) / c**2
            ) / c**2
            tq = (self.theta_sq - ta @ e @ ta / c) / c
            th_r2_th = (
                self.theta_sq - 2.0 * ta @ e @ ta / c + ta @ e @ pa @ e @ ta / c**2
            ) / c**2
            u = (t_star - pact @ e @ ta / c) / c  # V^T R theta*
        else:
            vrv = p / c
            vr2v = p / c**2
            tr_r = spec.d / c
            tr_r2 = spec.d / c**2
            tq = self.theta_sq / c
            th_r2_th = self.theta_sq / c**2
            u = t_star / c
        b = self.base
        traces = b * tr_r + np.diag(vrv)
        cmat = (
            np.outer(b, b) * tr_r2
            + b[:, None] * np.diag(vr2v)[None, :]
            + b[None, :] * np.diag(vr2v)[:, None]
            + vrv**2
        )
        g = spec.lam**2 / spec.d * (b * th_r2_th + u**2)
        return {"tq": tq, "traces": traces, "C": cmat, "g": g}


def _envelope_terms(spec: AoProblemSpec, p: AoRegressionParams) -> float:
    total = 0.0
    for l in range(spec.k):
        total += p.beta[l] * p.q[l] - p.xi[l] * p.r[l]
        if p.beta[l] > 0:
            total += (
                p.beta[l]
                / (p.beta[l] + p.q[l])
                * (spec.noise_sigmas[l] ** 2 + p.xi[l] ** 2)
            )
    return total / (2.0 * spec.k)


def ao_objective_concentrated_l2(
    spec: AoProblemSpec,
    params: AoRegressionParams,
    cache: Optional[_ResolventCache] = None,
) -> float:
    """Deterministic saddle objective for half_sq losses + ridge penalty."""
    if np.any(params.xi <= 0):
        raise ValueError("xi must be strictly positive in the concentrated objective")
    if cache is None:
        cache = _ResolventCache(spec)
    s = params.r / params.xi
    tq, traces = cache.query(s)
    value = _envelope_terms(spec, params)
    theta_sq = float(spec.theta_star @ spec.theta_star)
    value += spec.lam / (2.0 * spec.d) * (theta_sq - spec.lam * tq)
    value -= float(np.dot(params.beta**2 / spec.n, traces)) / (2.0 * spec.k**2)
    return value


def ao_objective_sampled(
    spec: AoProblemSpec,
    params: AoRegressionParams,
    losses: Optional[Sequence[SeparableLoss]] = None,
    g_draws: Optional[Sequence[np.ndarray]] = None,
    h_draws: Optional[Sequence[np.ndarray]] = None,
    noise_draws: Optional[Sequence[np.ndarray]] = None,
) -> float:
    """Stochastic saddle objective for general separable losses.

    Each draw set supplies g (k x d), h (k x n), and optionally realized
    noise vectors (k x n; default sigma_l * fresh normals are not drawn here,
    pass them explicitly or zeros are used).  The value is averaged across
    the supplied draw sets; with half_sq losses its expectation equals the
    concentrated objective.
    """
    if losses is None:
        losses = [HALF_SQ] * spec.k
    if len(losses) != spec.k:
        raise ValueError(f"need {spec.k} losses")
    g_draws = list(g_draws or [])
    h_draws = list(h_draws or [])
    if len(g_draws) != len(h_draws):
        raise ValueError("g_draws and h_draws must pair up")
    if not g_draws:
        raise ValueError("at least one draw set is required")
    if noise_draws is not None and len(noise_draws) != len(g_draws):
        raise ValueError("noise_draws must pair with g_draws")

    a = build_A(spec, params)
    a_inv_traces = _plain_inverse_traces(spec, a)
    linear = float(np.sum(params.beta * params.q - params.xi * params.r)) / (2.0 * spec.k)
    trace_term = -float(np.dot(params.beta**2 / spec.n, a_inv_traces)) / (2.0 * spec.k**2)
    env = MatrixScaledQuadEnvelope(reg_lambda=spec.lam, scale=a)

    values = []
    scale = np.sqrt(spec.d / spec.n) / spec.k
    for i, (g, h) in enumerate(zip(g_draws, h_draws)):
        g = np.asarray(g, dtype=float).reshape(spec.k, spec.d)
        h = np.asarray(h, dtype=float).reshape(spec.k, spec.n)
        total = linear + trace_term
        for l in range(spec.k):
            nu = (
                np.asarray(noise_draws[i][l], dtype=float)
                if noise_draws is not None
                else np.zeros(spec.n)
            )
            arg = nu - params.xi[l] * h[l]
            if params.beta[l] > 0:
                t = params.q[l] / params.beta[l]
                total += losses[l].envelope(t, arg) / (spec.n * spec.k)
        b = scale * sum(
            params.beta[l] * (spec.covariances[l].sqrt() @ g[l]) for l in range(spec.k)
        )
        quad_value, _ = quad_matrix_envelope(env, spec.theta_star, b)
        total += quad_value / spec.d
        values.append(total)
    return float(np.mean(values))


def _plain_inverse_traces(spec: AoProblemSpec, a: PsdMatrix) -> np.ndarray:
    c, low = scipy.linalg.cho_factor(a.entries, check_finite=False)
    a_inv = scipy.linalg.cho_solve((c, low), np.eye(spec.d), check_finite=False)
    return np.array([np.vdot(cov.entries, a_inv) for cov in spec.covariances])


@dataclass
class AoSolverConfig:
    """Saddle solver knobs.

    method="fixed_point" (default) solves the first-order saddle system
    directly (see _solve_saddle_system) from n_starts initial s vectors and
    verifies the result with derivative-free stationarity probes.

    method="pattern" (also the fallback) is a zeroth-order search: the
    objective is convex in q given everything else and jointly concave in
    (beta, r), so q is eliminated by its partial minimum
    q = max(0, sqrt(sigma^2 + xi^2) - beta) (a valid min/max swap), which
    leaves a bounded concave inner maximization; naive alternation on the
    four blocks can run away along a (beta, r) ridge when q is held fixed.
    The outer descent over xi is a +-step coordinate search with per
    coordinate step halving, from init_step down to init_step / 2**halvings.
    """

    init: Optional[AoRegressionParams] = None
    method: str = "fixed_point"
    floor: float = 1e-8
    init_step: float = 0.5
    halvings: int = 20
    max_outer: int = 400
    inner_rounds: int = 80
    tol: float = 1e-7
    n_starts: int = 10
    seed: int = 1234
    theta_hat_draws: int = 0
    theta_hat_seed: int = 99


_LOG_CAP = np.log(1e12)


def _golden_max(f, x0: float, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Maximize a unimodal 1-D function on [lo, hi] starting near x0.

    Brackets the maximum by geometric expansion around x0, then refines by
    golden-section; returns (argmax, value)."""
    x0 = min(max(x0, lo), hi)
    best_x, best_f = x0, f(x0)
    step = 0.5
    a = x0
    while a > lo:
        cand = max(a - step, lo)
        val = f(cand)
        a = cand
        if val > best_f:
            best_x, best_f = cand, val
        else:
            break
        step *= 2.0
    step = 0.5
    b = x0
    while b < hi:
        cand = min(b + step, hi)
        val = f(cand)
        b = cand
        if val > best_f:
            best_x, best_f = cand, val
        else:
            break
        step *= 2.0
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    if fc > fd:
        x, fx = c, fc
    else:
        x, fx = d, fd
    if best_f > fx:
        return best_x, best_f
    return x, fx


class _QEliminatedObjective:
    """Concentrated objective with q at its partial minimum.

    In terms of (xi, beta, r) the envelope block becomes
    (2 beta m - beta^2)/(2k) for beta <= m = sqrt(sigma^2 + xi^2) and
    m^2/(2k) beyond; concave in beta with the closed-form maximizer
    beta = m k n / (k n + Tr[Sigma_l R])."""

    def __init__(self, spec: AoProblemSpec, cache: _ResolventCache):
        self.spec = spec
        self.cache = cache
        self.n_evals = 0

    def value(self, xi: np.ndarray, beta: np.ndarray, r: np.ndarray) -> float:
        spec = self.spec
        self.n_evals += 1
        tq, traces = self.cache.query(r / xi)
        m = np.sqrt(spec.noise_sigmas**2 + xi**2)
        env = np.where(beta <= m, 2.0 * beta * m - beta**2, m**2)
        value = float(np.sum(env - xi * r)) / (2.0 * spec.k)
        theta_sq = float(spec.theta_star @ spec.theta_star)
        value += spec.lam / (2.0 * spec.d) * (theta_sq - spec.lam * tq)
        value -= float(np.dot(beta**2 / spec.n, traces)) / (2.0 * spec.k**2)
        return value

    def best_beta(self, xi: np.ndarray, r: np.ndarray) -> np.ndarray:
        spec = self.spec
        _, traces = self.cache.query(r / xi)
        m = np.sqrt(spec.noise_sigmas**2 + xi**2)
        return m * spec.k * spec.n / (spec.k * spec.n + traces)

    def inner_max(
        self,
        xi: np.ndarray,
        beta: np.ndarray,
        r: np.ndarray,
        rounds: int,
        tol: float,
        floor_log: float,
    ) -> tuple[np.ndarray, np.ndarray, float]:
        """Maximize over (beta, r) for fixed xi: alternate the closed-form
        beta with per-coordinate golden searches in log r."""
        for _ in range(rounds):
            beta = self.best_beta(xi, r)
            move = 0.0
            for l in range(self.spec.k):

                def f(log_rl, l=l):
                    r_try = r.copy()
                    r_try[l] = np.exp(log_rl)
                    return self.value(xi, beta, r_try)

                log_r0 = np.log(r[l])
                log_r, _ = _golden_max(f, log_r0, floor_log, _LOG_CAP, max(tol, 1e-9))
                move = max(move, abs(log_r - log_r0))
                r[l] = np.exp(log_r)
            if move < tol:
                break
        beta = self.best_beta(xi, r)
        return beta, r, self.value(xi, beta, r)


def _solve_saddle_system(
    spec: AoProblemSpec,
    cache: _ResolventCache,
    s0: np.ndarray,
    tol: float = 1e-13,
    max_iter: int = 2000,
) -> tuple[Optional[AoRegressionParams], dict]:
    """Solve the first-order saddle system directly.

    Stationarity in xi reduces to the fixed point s_l = kn/(kn + Tr[Sigma_l
    R(s)]) in s = r/xi alone; given s, stationarity in s is a linear system
    for xi_l^2, and beta = sqrt(sigma^2 + xi^2) s, q = sqrt(sigma^2 + xi^2)
    (1 - s) follow in closed form.  Returns (None, meta) if the iteration or
    the linear system degenerates.
    """
    k, n = spec.k, spec.n
    s = np.clip(np.asarray(s0, dtype=float), 1e-12, None)
    converged = False
    iters = 0
    damping = 1.0
    prev_delta = np.inf
    for iters in range(1, max_iter + 1):
        _, traces = cache.query(s)
        s_new = k * n / (k * n + traces)
        delta = float(np.max(np.abs(s_new - s)))
        if delta > prev_delta:
            damping = max(0.25, damping * 0.5)
        prev_delta = delta
        s = (1.0 - damping) * s + damping * s_new
        if delta < tol:
            converged = True
            break
    meta = {"method": "fixed_point", "fp_iterations": iters, "converged": converged}
    if not converged:
        return None, meta
    stats = cache.second_order(s)
    mmat = spec.n * stats["C"] / (k * n + stats["traces"])[None, :] ** 2
    sigma_sq = spec.noise_sigmas**2
    try:
        xi_sq = np.linalg.solve(np.eye(k) - mmat, mmat @ sigma_sq + stats["g"])
    except np.linalg.LinAlgError:
        meta["converged"] = False
        return None, meta
    if np.any(xi_sq < -1e-12):
        meta["converged"] = False
        return None, meta
    xi = np.sqrt(np.clip(xi_sq, 0.0, None))
    m = np.sqrt(sigma_sq + xi**2)
    beta = m * s
    q = m * (1.0 - s)
    params = AoRegressionParams(xi=np.maximum(xi, 1e-10), q=q, beta=beta, r=s * np.maximum(xi, 1e-10))
    return params, meta


def _search_saddle(spec, cache, init: AoRegressionParams, cfg: AoSolverConfig):
    k = spec.k
    obj = _QEliminatedObjective(spec, cache)
    floor_log = np.log(cfg.floor)
    min_step = cfg.init_step / 2**cfg.halvings
    inner_tol = min(cfg.tol, 1e-7)

    xi = np.clip(np.asarray(init.xi, dtype=float), cfg.floor, None)
    beta = np.clip(np.asarray(init.beta, dtype=float), cfg.floor, None)
    r = np.clip(np.asarray(init.r, dtype=float), cfg.floor, None)

    beta, r, best_val = obj.inner_max(
        xi, beta, r, cfg.inner_rounds, inner_tol, floor_log
    )
    steps = np.full(k, cfg.init_step)
    converged = False
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        for l in range(k):
            if steps[l] < min_step:
                continue
            improved = False
            for delta in (steps[l], -steps[l]):
                cand_log = max(np.log(xi[l]) + delta, floor_log)
                if cand_log == np.log(xi[l]):
                    continue
                xi_try = xi.copy()
                xi_try[l] = np.exp(cand_log)
                b_try, r_try, val = obj.inner_max(
                    xi_try, beta.copy(), r.copy(), cfg.inner_rounds, inner_tol, floor_log
                )
                if val < best_val - 1e-15 * max(1.0, abs(best_val)):
                    xi, beta, r, best_val = xi_try, b_try, r_try, val
                    improved = True
                    break
            if not improved:
                steps[l] *= 0.5
        if np.all(steps < min_step):
            converged = True
            break
    m = np.sqrt(spec.noise_sigmas**2 + xi**2)
    q = np.maximum(m - beta, 0.0)
    params = AoRegressionParams(xi=xi, q=q, beta=beta, r=r)
    meta = {
        "converged": converged,
        "outer_iterations": outer,
        "n_evals": obj.n_evals,
        "final_step": float(steps.max()),
    }
    return params, best_val, meta


def stationarity_residual(
    spec: AoProblemSpec,
    params: AoRegressionParams,
    cache: Optional[_ResolventCache] = None,
    delta: float = 1e-3,
) -> float:
    """Largest saddle violation under +-delta coordinate probes.

    Min-block probes must not decrease the objective, max-block probes must
    not increase it; returns the worst violation magnitude.
    """
    if cache is None:
        cache = _ResolventCache(spec)
    base = ao_objective_concentrated_l2(spec, params, cache)
    vec = params.as_vector()
    k = spec.k
    worst = 0.0
    for i in range(vec.size):
        for sign in (1.0, -1.0):
            probe = vec.copy()
            probe[i] = max(probe[i] + sign * delta, 1e-12)
            if probe[i] == vec[i]:
                continue
            val = ao_objective_concentrated_l2(
                spec, AoRegressionParams.from_vector(probe, k), cache
            )
            if i < 2 * k:
                worst = max(worst, base - val)
            else:
                worst = max(worst, val - base)
    return worst


def solve_ao_regression(
    spec: AoProblemSpec, config: Optional[AoSolverConfig] = None
) -> AoRegressionSolution:
    """Find the saddle of the concentrated objective and emit predictions.

    Runs cfg.n_starts deterministic restarts (all-ones plus log-uniform
    points) and keeps the candidate with the smallest stationarity residual;
    non-convergence is reported in the solution meta rather
    than raised.
    """
    cfg = config or AoSolverConfig()
    cache = _ResolventCache(spec)

    best = None
    if cfg.method == "fixed_point":
        rng = stream(cfg.seed, "ao_regression_starts")
        s_starts = [np.full(spec.k, 0.5)]
        while len(s_starts) < cfg.n_starts:
            s_starts.append(rng.uniform(0.02, 1.0, size=spec.k))
        objectives = []
        for s0 in s_starts[: cfg.n_starts]:
            params, meta = _solve_saddle_system(spec, cache, s0)
            if params is None:
                continue
            objective = ao_objective_concentrated_l2(spec, params, cache)
            objectives.append(objective)
            if best is None:
                residual = stationarity_residual(spec, params, cache)
                meta["stationarity_residual"] = float(residual)
                best = (residual, params, objective, meta)
        if best is not None:
            best[3]["start_objective_spread"] = float(
                np.max(objectives) - np.min(objectives)
            )

    if best is None:
        # Derivative-free fallback (also the path when method="pattern").
        starts = []
        if cfg.init is not None:
            starts.append(cfg.init)
        starts.append(AoRegressionParams.ones(spec.k))
        rng = stream(cfg.seed, "ao_regression_starts")
        while len(starts) < cfg.n_starts:
            vec = np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=4 * spec.k))
            starts.append(AoRegressionParams.from_vector(vec, spec.k))
        for start in starts[: cfg.n_starts]:
            params, objective, meta = _search_saddle(spec, cache, start, cfg)
            meta["method"] = "pattern"
            residual = stationarity_residual(spec, params, cache)
            meta["stationarity_residual"] = float(residual)
            candidate = (residual, params, objective, meta)
            if best is None or residual < best[0]:
                best = candidate

    residual, params, objective, meta = best
    if not meta["converged"]:
        warnings.warn(
            "auxiliary saddle search did not converge "
            f"(stationarity residual {residual:.2e})",
            RuntimeWarning,
            stacklevel=2,
        )

    solution = AoRegressionSolution(
        params=params,
        objective=objective,
        predicted_gen_error=predict_gen_error(spec, params),
        predicted_train_error=predicted_train_error(spec, params),
        meta=meta,
    )
    if cfg.theta_hat_draws > 0:
        g = stream(cfg.theta_hat_seed, "ao_theta_hat").standard_normal(
            (cfg.theta_hat_draws, spec.k, spec.d)
        )
        solution.predicted_theta_hat = np.mean(
            [predict_theta_hat(spec, solution, gi) for gi in g], axis=0
        )
    return solution


def predict_gen_error(spec: AoProblemSpec, solution) -> float:
    """Closed-form generalization error at given saddle parameters.

    (1/2k) sum_l [ sigma_l^2 + (lam^2/d) theta*^T R Sigma_l R theta*
                   + (1/(n k^2)) sum_m beta_m^2 Tr(Sigma_m R Sigma_l R) ]
    with R = (lam I + A)^{-1}; equals the expected error of the predicted
    theta_hat below, and at the saddle also (1/2k) sum_l (sigma_l^2+xi_l^2).
    """
    params = solution.params if isinstance(solution, AoRegressionSolution) else solution
    a = build_A(spec, params)
    m = a.entries + spec.lam * np.eye(spec.d)
    c, low = scipy.linalg.cho_factor(m, check_finite=False)
    r_full = scipy.linalg.cho_solve((c, low), np.eye(spec.d), check_finite=False)
    r_theta = r_full @ spec.theta_star
    total = 0.0
    rsr = [r_full @ cov.entries @ r_full for cov in spec.covariances]
    for l in range(spec.k):
        sig_l = spec.covariances[l].entries
        term = spec.noise_sigmas[l] ** 2
        term += spec.lam**2 / spec.d * float(r_theta @ (sig_l @ r_theta))
        cross = sum(
            params.beta[m_] ** 2 * np.vdot(spec.covariances[m_].entries, rsr[l])
            for m_ in range(spec.k)
        )
        term += cross / (spec.n * spec.k**2)
        total += term
    return total / (2.0 * spec.k)


def predicted_train_error(spec: AoProblemSpec, params: AoRegressionParams) -> float:
    """Loss part of the objective implied by the envelope's prox point.

    The optimal residual is the prox shrinkage (beta/(beta+q)) of the
    effective noise, whose half-squared norm concentrates to
    (1/2k) sum_l (beta/(beta+q))^2 (sigma_l^2 + xi_l^2)."""
    total = 0.0
    for l in range(spec.k):
        if params.beta[l] == 0 and params.q[l] == 0:
            continue
        shrink = params.beta[l] / (params.beta[l] + params.q[l])
        total += shrink**2 * (spec.noise_sigmas[l] ** 2 + params.xi[l] ** 2)
    return total / (2.0 * spec.k)


def predict_theta_hat(spec: AoProblemSpec, solution, g: np.ndarray) -> np.ndarray:
    """Finite-size surrogate solution (lam I + A)^{-1} (A theta* - b) for one
    draw g of shape (k, d); b = (1/k) sqrt(d/n) sum_l beta_l Sigma_l^{1/2} g_l."""
    params = solution.params if isinstance(solution, AoRegressionSolution) else solution
    g = np.asarray(g, dtype=float).reshape(spec.k, spec.d)
    a = build_A(spec, params)
    b = np.sqrt(spec.d / spec.n) / spec.k * sum(
        params.beta[l] * (spec.covariances[l].sqrt() @ g[l]) for l in range(spec.k)
    )
    rhs = a.entries @ spec.theta_star - b
    m = a.entries + spec.lam * np.eye(spec.d)
    c, low = scipy.linalg.cho_factor(m, check_finite=False)
    return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)


def k1_isotropic_reference(
    xi: float,
    q: float,
    beta: float,
    r: float,
    sigma_nu: float,
    rho: float,
    lam: float,
    n: int,
    d: int,
) -> float:
    """Scalar form of the concentrated objective for k=1, Sigma = I.

    rho = ||theta*||^2 / d.  Kept as an independent reduction for oracle
    cross-checks; shares no code with the matrix path.
    """
    s = r / xi
    value = 0.5 * beta * q - 0.5 * xi * r
    if beta > 0:
        value += 0.5 * beta / (beta + q) * (sigma_nu**2 + xi**2)
    value += 0.5 * lam * rho * s / (lam + s)
    value -= 0.5 * beta**2 * d / (n * (lam + s))
    return value

"""Numerical verification of the Gaussian comparison backbone.

Three suites, all statistical or exact:

* covariance_gap / variance_match: the analytic covariance identities of
  the comparison pair, checked pointwise (gap >= 0, variances equal);
* mc_gcgmt_inequality: the probability inequality
  P(Phi < t) <= 2^k P(phi < t) on finite min-max instances, estimated by
  Monte-Carlo with exhaustive enumeration of the min-max;
* lipschitz_check / concentration_check: the sqrt(2) sigma R_w R_v
  Lipschitz bound of the auxiliary value in (g, h) and the Gaussian
  concentration bound it implies.

The coupling and the built-in psi are separable across the k dual blocks,
so the exhaustive max over the product net factorizes into per-block
maxima; both the factored and the full tensor enumeration are exact over
the same finite sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .covariance import PsdMatrix
from .datagen import ConfigError
from .rngstreams import stream

__all__ = [
    "PsiBilinear",
    "MinMaxInstance",
    "GcgmtReport",
    "LipschitzReport",
    "ConcentrationReport",
    "covariance_gap",
    "variance_match",
    "mc_gcgmt_inequality",
    "lipschitz_check",
    "concentration_check",
    "ball_net",
]

ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class PsiBilinear:
    """psi(w, v) = sum_l w^T P_l v_l + c_w ||w||^2 - c_v ||v||^2,
    convex-concave for c_w, c_v >= 0."""

    p_blocks: tuple[np.ndarray, ...]
    c_w: float = 0.0
    c_v: float = 0.0

    def __post_init__(self):
        if self.c_w < 0 or self.c_v < 0:
            raise ConfigError("c_w and c_v must be non-negative for convex-concave psi")

    def block_value(self, l: int, w: np.ndarray, v_l: np.ndarray) -> np.ndarray:
        return w @ self.p_blocks[l] @ v_l.T if self.p_blocks else 0.0

    @classmethod
    def zero(cls, d: int, n_list: Sequence[int]) -> "PsiBilinear":
        return cls(tuple(np.zeros((d, n)) for n in n_list))


@dataclass
class MinMaxInstance:
    """Finite min-max instance for the comparison checks.

    S_w is an (I, d) array of primal points; S_v_blocks holds (J_l, n_l)
    arrays of dual points per block.  alpha_maps / beta_maps default to
    w -> Sigma_l^{1/2} w and v -> v; arbitrary continuous maps may be
    supplied (vectorized over rows of a points array).
    """

    k: int
    d: int
    n_list: list[int]
    S_w: np.ndarray
    S_v_blocks: list[np.ndarray]
    covariances: list[PsdMatrix]
    psi: Optional[PsiBilinear] = None
    alpha_maps: Optional[list[Callable[[np.ndarray], np.ndarray]]] = None
    beta_maps: Optional[list[Callable[[np.ndarray], np.ndarray]]] = None

    def __post_init__(self):
        self.S_w = np.atleast_2d(np.asarray(self.S_w, dtype=float))
        self.S_v_blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in self.S_v_blocks]
        if len(self.S_v_blocks) != self.k or len(self.covariances) != self.k:
            raise ConfigError(f"need {self.k} dual nets and covariances")
        if self.S_w.size == 0 or any(b.size == 0 for b in self.S_v_blocks):
            raise ConfigError("point lists must be non-empty")
        if self.psi is None:
            self.psi = PsiBilinear.zero(self.d, self.n_list)

    def alpha(self, l: int, w: np.ndarray) -> np.ndarray:
        """alpha_l applied to rows of w (any leading shape)."""
        if self.alpha_maps is not None:
            return np.asarray(self.alpha_maps[l](w), dtype=float)
        return w @ self.covariances[l].sqrt()

    def beta(self, l: int, v: np.ndarray) -> np.ndarray:
        if self.beta_maps is not None:
            return np.asarray(self.beta_maps[l](v), dtype=float)
        return np.asarray(v, dtype=float)

    def combos(self) -> int:
        total = self.S_w.shape[0]
        for b in self.S_v_blocks:
            total *= b.shape[0]
        return total

    def sigma_op(self) -> float:
        return max(np.sqrt(c.eigvals()[-1]) for c in self.covariances)


def covariance_gap(
    inst: MinMaxInstance,
    w: np.ndarray,
    w_prime: np.ndarray,
    v: Sequence[np.ndarray],
    v_prime: Sequence[np.ndarray],
) -> float:
    """E[Y Y'] - E[X X'] for the comparison pair at two index points.

    Equals sum_l (beta_l(v_l) . beta_l(v'_l) - |beta_l(v_l)||beta_l(v'_l)|)
    (alpha_l(w) . alpha_l(w') - |alpha_l(w)||alpha_l(w')|); both factors are
    <= 0 by Cauchy-Schwarz, so the gap is >= 0, and it vanishes when
    w = w' or v = v'.
    """
    total = 0.0
    for l in range(inst.k):
        aw = inst.alpha(l, np.asarray(w, dtype=float))
        aw_p = inst.alpha(l, np.asarray(w_prime, dtype=float))
        bv = inst.beta(l, np.asarray(v[l], dtype=float))
        bv_p = inst.beta(l, np.asarray(v_prime[l], dtype=float))
        dual = float(bv @ bv_p) - np.linalg.norm(bv) * np.linalg.norm(bv_p)
        primal = float(aw @ aw_p) - np.linalg.norm(aw) * np.linalg.norm(aw_p)
        total += dual * primal
    return total


def variance_match(
    inst: MinMaxInstance, w: np.ndarray, v: Sequence[np.ndarray]
) -> tuple[float, float]:
    """Second moments of the two processes at one index point.

    Both reduce to 2 sum_l ||alpha_l(w)||^2 ||beta_l(v_l)||^2, computed here
    from each process's own covariance formula.
    """
    ex2 = 0.0
    ey2 = 0.0
    for l in range(inst.k):
        aw = inst.alpha(l, np.asarray(w, dtype=float))
        bv = inst.beta(l, np.asarray(v[l], dtype=float))
        na2 = float(aw @ aw)
        nb2 = float(bv @ bv)
        # X = sum_l |beta| g.alpha + |alpha| h.beta  -> |beta|^2|alpha|^2 + |alpha|^2|beta|^2
        ex2 += nb2 * na2 + na2 * nb2
        # Y = sum_l beta.G alpha + gamma |alpha||beta| -> beta.beta alpha.alpha + |a|^2|b|^2
        ey2 += float(bv @ bv) * float(aw @ aw) + na2 * nb2
    return ex2, ey2


@dataclass
class GcgmtReport:
    t_grid: np.ndarray
    p_phi_hat: np.ndarray
    p_phi_stderr: np.ndarray
    p_ao_scaled: np.ndarray
    p_ao_stderr: np.ndarray
    violation_sigma: np.ndarray
    trials: int

    def max_violation_sigma(self) -> float:
        return float(np.max(self.violation_sigma))

    def passed(self, n_sigma: float = 3.0) -> bool:
        return bool(np.all(self.violation_sigma <= n_sigma))

    def rows(self) -> list[dict]:
        return [
            {
                "t": float(self.t_grid[i]),
                "p_phi_hat": float(self.p_phi_hat[i]),
                "p_phi_stderr": float(self.p_phi_stderr[i]),
                "p_ao_scaled": float(self.p_ao_scaled[i]),
                "p_ao_stderr": float(self.p_ao_stderr[i]),
                "violation_sigma": float(self.violation_sigma[i]),
            }
            for i in range(len(self.t_grid))
        ]


def _psi_tensor(inst: MinMaxInstance) -> np.ndarray:
    """psi over the product net, shaped (J_1, ..., J_k, I)."""
    psi = inst.psi
    i_count = inst.S_w.shape[0]
    shape = [b.shape[0] for b in inst.S_v_blocks] + [i_count]
    total = np.zeros(shape)
    w_norm_sq = np.sum(inst.S_w**2, axis=1)
    total += psi.c_w * w_norm_sq  # broadcasts on the trailing axis
    for l, block in enumerate(inst.S_v_blocks):
        bilinear = inst.S_w @ psi.p_blocks[l] @ block.T  # (I, J_l)
        v_norm_sq = np.sum(block**2, axis=1)
        expand = [None] * (inst.k + 1)
        expand[l] = slice(None)
        expand[inst.k] = slice(None)
        contrib = bilinear.T - psi.c_v * v_norm_sq[:, None]
        total += contrib[tuple(expand)]
    return total


def mc_gcgmt_inequality(
    inst: MinMaxInstance,
    t_grid: Sequence[float],
    trials: int,
    seed: int,
    batch: int = 4096,
) -> GcgmtReport:
    """Estimate P(Phi < t) and 2^k P(phi < t) over fresh Gaussian draws.

    Phi is the coupled-matrix side including the gamma_l |alpha||beta|
    terms; phi is the decoupled-vector side.  Both min-max values are taken
    by exhaustive enumeration over the instance's finite nets.  Requires
    the product net to stay under the enumeration cap and enough trials
    for the binomial error bars to be meaningful.
    """
    if inst.combos() > ENUMERATION_CAP:
        raise ConfigError(
            f"net product {inst.combos()} exceeds enumeration cap {ENUMERATION_CAP}"
        )
    t_grid = np.asarray(t_grid, dtype=float)
    alphas = [inst.alpha(l, inst.S_w) for l in range(inst.k)]  # (I, d)
    betas = [inst.beta(l, inst.S_v_blocks[l]) for l in range(inst.k)]  # (J_l, n_l)
    alpha_norms = [np.linalg.norm(a, axis=1) for a in alphas]
    beta_norms = [np.linalg.norm(b, axis=1) for b in betas]
    psi_tensor = _psi_tensor(inst)
    i_count = inst.S_w.shape[0]

    phi_vals = np.empty(trials)
    cap_vals = np.empty(trials)
    done = 0
    batch_idx = 0
    while done < trials:
        b = min(batch, trials - done)
        rng = stream(seed, "gcgmt_trials", batch_idx)
        batch_idx += 1
        y_total = np.broadcast_to(psi_tensor, (b,) + psi_tensor.shape).copy()
        x_total = np.broadcast_to(psi_tensor, (b,) + psi_tensor.shape).copy()
        for l in range(inst.k):
            n_l = inst.n_list[l]
            g_mat = rng.standard_normal((b, n_l, inst.d))
            gamma = rng.standard_normal(b)
            g_vec = rng.standard_normal((b, inst.d))
            h_vec = rng.standard_normal((b, n_l))
            coup = np.einsum("jn,bnd,id->bji", betas[l], g_mat, alphas[l])
            coup += gamma[:, None, None] * np.outer(beta_norms[l], alpha_norms[l])
            x_block = (
                beta_norms[l][None, :, None] * (g_vec @ alphas[l].T)[:, None, :]
                + (h_vec @ betas[l].T)[:, :, None] * alpha_norms[l][None, None, :]
            )
            # embed the (b, J_l, I) block along its axis of the product tensor
            idx = tuple(
                slice(None) if ax in (0, 1 + l, 1 + inst.k) else None
                for ax in range(inst.k + 2)
            )
            y_total += coup[idx] if inst.k > 1 else coup
            x_total += x_block[idx] if inst.k > 1 else x_block
        flat_y = y_total.reshape(b, -1, i_count)
        flat_x = x_total.reshape(b, -1, i_count)
        cap_vals[done : done + b] = flat_y.max(axis=1).min(axis=1)
        phi_vals[done : done + b] = flat_x.max(axis=1).min(axis=1)
        done += b

    scale = 2.0**inst.k
    p_phi = np.array([(cap_vals < t).mean() for t in t_grid])
    p_ao = np.array([(phi_vals < t).mean() for t in t_grid])
    se_phi = np.sqrt(p_phi * (1 - p_phi) / trials)
    se_ao = scale * np.sqrt(p_ao * (1 - p_ao) / trials)
    combined = np.sqrt(se_phi**2 + se_ao**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        violation = np.where(
            combined > 0,
            (p_phi - scale * p_ao) / combined,
            np.where(p_phi > scale * p_ao, np.inf, -np.inf),
        )
    return GcgmtReport(
        t_grid=t_grid,
        p_phi_hat=p_phi,
        p_phi_stderr=se_phi,
        p_ao_scaled=scale * p_ao,
        p_ao_stderr=se_ao,
        violation_sigma=violation,
        trials=trials,
    )


def _aux_kernel(inst: MinMaxInstance) -> dict:
    """Precomputed net projections for auxiliary_value, cached per instance."""
    cache = getattr(inst, "_aux_cache", None)
    if cache is not None:
        return cache
    psi = inst.psi
    blocks = []
    for l in range(inst.k):
        aw = inst.alpha(l, inst.S_w)  # (I, d)
        bv = inst.beta(l, inst.S_v_blocks[l])  # (J, n_l)
        a_norm = np.linalg.norm(aw, axis=1)
        b_norm = np.linalg.norm(bv, axis=1)
        static = inst.S_w @ psi.p_blocks[l] @ inst.S_v_blocks[l].T  # (I, J)
        static = static - psi.c_v * np.sum(inst.S_v_blocks[l] ** 2, axis=1)[None, :]
        # With constant dual norms and no psi contribution the block max
        # over j splits into g- and h-parts (sphere dual nets, zero psi).
        separable = (
            np.ptp(b_norm) <= 1e-12 * max(b_norm.max(), 1.0)
            and np.abs(static - static[:1, :1]).max() <= 1e-12 * max(abs(static).max(), 1.0)
        )
        blocks.append(
            {
                "aw": aw,
                "bv": bv,
                "a_norm": a_norm,
                "b_norm": b_norm,
                "static": static,
                "separable": separable,
            }
        )
    cache = {"w_part": psi.c_w * np.sum(inst.S_w**2, axis=1), "blocks": blocks}
    inst._aux_cache = cache
    return cache


def auxiliary_value(inst: MinMaxInstance, g: Sequence[np.ndarray], h: Sequence[np.ndarray]) -> float:
    """phi(g, h) = min_w max_v sum_l |beta_l(v_l)| g_l.alpha_l(w)
    + |alpha_l(w)| h_l.beta_l(v_l) + psi(w, v), by enumeration.

    The coupling and psi are separable across dual blocks, so the max over
    the product net is the sum of per-block maxima (identical to the full
    enumeration, factored for speed on dense ball nets).
    """
    kernel = _aux_kernel(inst)
    total = kernel["w_part"].copy()
    for l, blk in enumerate(kernel["blocks"]):
        g_dot = blk["aw"] @ np.asarray(g[l], dtype=float)  # (I,)
        h_dot = blk["bv"] @ np.asarray(h[l], dtype=float)  # (J,)
        if blk["separable"]:
            total += (
                blk["b_norm"][0] * g_dot
                + blk["a_norm"] * h_dot.max()
                + blk["static"][0, 0]
            )
        else:
            block = (
                np.outer(g_dot, blk["b_norm"])
                + np.outer(blk["a_norm"], h_dot)
                + blk["static"]
            )
            total += block.max(axis=1)
    return float(total.min())


@dataclass
class LipschitzReport:
    max_ratio: float
    bound: float
    n_pairs: int
    ratios: np.ndarray = field(repr=False, default=None)

    def passed(self, slack: float = 1e-9) -> bool:
        return self.max_ratio <= self.bound * (1.0 + slack)

    def rows(self) -> list[dict]:
        return [
            {"pair": i, "ratio": float(r), "bound": self.bound}
            for i, r in enumerate(self.ratios)
        ]


def _radii(inst: MinMaxInstance) -> tuple[float, float]:
    r_w = float(np.max(np.linalg.norm(inst.S_w, axis=1)))
    r_v = float(
        np.sqrt(sum(np.max(np.sum(b**2, axis=1)) for b in inst.S_v_blocks))
    )
    return r_w, r_v


def lipschitz_check(
    inst: MinMaxInstance,
    trials: int,
    seed: int,
    min_distance: float = 1e-8,
    structured_fraction: float = 0.1,
) -> LipschitzReport:
    """Sampled Lipschitz ratios of phi against the sqrt(2) sigma R_w R_v bound.

    Pairs (g, h), (g', h') are mostly independent draws; a fraction are
    coordinated moves along the current (g, h) directions, which approach
    the bound on isotropic instances and give the test its power.  Requires
    the default alpha/beta maps (the bound is stated for them).
    """
    if inst.alpha_maps is not None or inst.beta_maps is not None:
        raise ConfigError("the Lipschitz bound applies to the default maps only")
    r_w, r_v = _radii(inst)
    bound = inst.sigma_op() * np.sqrt(2.0) * r_w * r_v
    rng = stream(seed, "lipschitz_pairs")
    ratios = []
    n_structured = int(structured_fraction * trials)
    for trial in range(trials):
        g1 = [rng.standard_normal(inst.d) for _ in range(inst.k)]
        h1 = [rng.standard_normal(n) for n in inst.n_list]
        if trial < n_structured:
            # shrink every g_l along itself, grow every h_l along itself
            delta = 0.3 * rng.uniform(0.1, 1.0)
            g2 = [g * (1.0 - delta / max(np.linalg.norm(g), 1e-12)) for g in g1]
            h2 = [h * (1.0 + delta / max(np.linalg.norm(h), 1e-12)) for h in h1]
        else:
            g2 = [rng.standard_normal(inst.d) for _ in range(inst.k)]
            h2 = [rng.standard_normal(n) for n in inst.n_list]
        dist_sq = sum(np.sum((a - b) ** 2) for a, b in zip(g1, g2))
        dist_sq += sum(np.sum((a - b) ** 2) for a, b in zip(h1, h2))
        dist = np.sqrt(dist_sq)
        if dist < min_distance:
            continue
        ratios.append(abs(auxiliary_value(inst, g1, h1) - auxiliary_value(inst, g2, h2)) / dist)
    ratios = np.asarray(ratios)
    return LipschitzReport(
        max_ratio=float(ratios.max()), bound=float(bound), n_pairs=len(ratios), ratios=ratios
    )


@dataclass
class ConcentrationReport:
    epsilon_grid: np.ndarray
    frequency: np.ndarray
    bound: np.ndarray
    stderr: np.ndarray
    mean: float
    trials: int

    def passed(self, n_sigma: float = 3.0) -> bool:
        return bool(np.all(self.frequency <= self.bound + n_sigma * self.stderr))

    def rows(self) -> list[dict]:
        return [
            {
                "epsilon": float(self.epsilon_grid[i]),
                "frequency": float(self.frequency[i]),
                "bound": float(self.bound[i]),
                "stderr": float(self.stderr[i]),
            }
            for i in range(len(self.epsilon_grid))
        ]


def concentration_check(
    inst: MinMaxInstance,
    trials: int,
    epsilon_grid: Sequence[float],
    seed: int,
) -> ConcentrationReport:
    """Empirical exceedance of |phi - E phi| against
    exp(-eps^2 / (4 sigma^2 R_w^2 R_v^2)), with E phi estimated by the
    sample mean."""
    if inst.alpha_maps is not None or inst.beta_maps is not None:
        raise ConfigError("the concentration bound applies to the default maps only")
    r_w, r_v = _radii(inst)
    denom = 4.0 * inst.sigma_op() ** 2 * r_w**2 * r_v**2
    rng = stream(seed, "concentration_trials")
    values = np.empty(trials)
    for t in range(trials):
        g = [rng.standard_normal(inst.d) for _ in range(inst.k)]
        h = [rng.standard_normal(n) for n in inst.n_list]
        values[t] = auxiliary_value(inst, g, h)
    mean = float(values.mean())
    eps = np.asarray(epsilon_grid, dtype=float)
    freq = np.array([(np.abs(values - mean) > e).mean() for e in eps])
    bound = np.exp(-(eps**2) / denom)
    stderr = np.sqrt(freq * (1 - freq) / trials)
    return ConcentrationReport(
        epsilon_grid=eps,
        frequency=freq,
        bound=bound,
        stderr=stderr,
        mean=mean,
        trials=trials,
    )


def ball_net(
    radius: float, dim: int, count: int, seed: int, surface: bool = False
) -> np.ndarray:
    """count points covering the radius-ball (or its boundary sphere).

    Gaussian directions at stratified radii; surface=True pins every point
    to the boundary, which keeps the compact-set bound identical (the
    max-norm is still the radius) while giving the auxiliary value real
    variation: a ball net containing interior points drives the min-max
    toward the w = 0 value.
    """
    rng = stream(seed, "ball_net")
    dirs = rng.standard_normal((count, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    if surface:
        return radius * dirs
    radii = radius * np.linspace(0.0, 1.0, count) ** (1.0 / dim)
    radii[: max(count // 10, 1)] = radius  # boundary points realize R exactly
    return dirs * radii[:, None]

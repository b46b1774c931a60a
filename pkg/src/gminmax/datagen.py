"""Seeded generation of the two data models.

Multi-source regression: per source l, X_l = G_l Sigma_l^{1/2} with G_l iid
standard normal, labels y_l = X_l theta_star / sqrt(d) + nu_l, noise
nu_l ~ N(0, sigma_{nu,l}^2 I).

Two-cluster GMM classification: the first n/2 rows are N(mu1, Sigma1), the
last n/2 are N(mu2, Sigma2), labels +1 then -1 in ordered halves.

Sources and components draw from disjoint RNG substreams addressed by
(master seed, component tag, source index); see rngstreams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covariance import CovarianceSpec, PsdMatrix, build
from .rngstreams import stream

__all__ = [
    "ConfigError",
    "RegressionDataset",
    "GmmDataset",
    "gen_regression",
    "gen_correlated_means",
    "gen_gmm",
]


class ConfigError(ValueError):
    """Inconsistent generator inputs."""


@dataclass
class RegressionDataset:
    k: int
    n: int
    d: int
    X_list: list[np.ndarray]
    y_list: list[np.ndarray]
    noise_list: list[np.ndarray]
    theta_star: np.ndarray
    noise_sigmas: np.ndarray
    covariances: list[PsdMatrix]

    def reconstruct_y(self, l: int) -> np.ndarray:
        """Recompute y_l from stored parts; bitwise equal to y_list[l]."""
        return self.X_list[l] @ self.theta_star / np.sqrt(self.d) + self.noise_list[l]


@dataclass
class GmmDataset:
    n: int
    d: int
    data: np.ndarray
    labels: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray
    sigma1: PsdMatrix
    sigma2: PsdMatrix


def gen_regression(
    k: int,
    n: int,
    d: int,
    cov_specs: list[CovarianceSpec] | list[PsdMatrix],
    noise_sigmas: list[float],
    theta_star: np.ndarray,
    seed: int,
) -> RegressionDataset:
    """Draw one multi-source regression dataset, deterministic in the seed.

    cov_specs may be pre-built PsdMatrix instances (reused across datasets,
    e.g. one realized spiked covariance shared by a whole sweep) or specs,
    in which case source l's covariance is built from substream (seed,
    "cov", l).
    """
    if len(cov_specs) != k or len(noise_sigmas) != k:
        raise ConfigError(f"need {k} covariance specs and noise sigmas")
    theta_star = np.asarray(theta_star, dtype=float)
    if theta_star.shape != (d,):
        raise ConfigError(f"theta_star must have length {d}")
    covs = []
    for l, spec in enumerate(cov_specs):
        if isinstance(spec, PsdMatrix):
            covs.append(spec)
        else:
            if spec.dim != d:
                raise ConfigError(f"covariance {l} has dim {spec.dim}, expected {d}")
            covs.append(build(spec, rng_seed=_spawn_seed(seed, "cov", l)))
    sqrt_d = np.sqrt(d)
    X_list, y_list, noise_list = [], [], []
    for l in range(k):
        g = stream(seed, "regression_G", l).standard_normal((n, d))
        x = g @ covs[l].sqrt()
        nu = noise_sigmas[l] * stream(seed, "regression_noise", l).standard_normal(n)
        X_list.append(x)
        noise_list.append(nu)
        y_list.append(x @ theta_star / sqrt_d + nu)
    return RegressionDataset(
        k=k,
        n=n,
        d=d,
        X_list=X_list,
        y_list=y_list,
        noise_list=noise_list,
        theta_star=theta_star,
        noise_sigmas=np.asarray(noise_sigmas, dtype=float),
        covariances=covs,
    )


def _spawn_seed(seed: int, tag: str, index: int) -> int:
    from .rngstreams import child_seed

    return child_seed(seed, tag, index)


def gen_correlated_means(d: int, r: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Two standard-normal mean vectors with matching-entry correlation r.

    mu2 = r mu1 + sqrt(1 - r^2) eps keeps both marginals N(0, I) while
    E[mu1_i mu2_i] = r, so mu1^T mu2 is close to r d.
    """
    if abs(r) > 1:
        raise ConfigError(f"correlation must lie in [-1, 1], got {r}")
    rng = stream(seed, "gmm_means")
    mu1 = rng.standard_normal(d)
    eps = rng.standard_normal(d)
    mu2 = r * mu1 + np.sqrt(1.0 - r * r) * eps
    return mu1, mu2


def gen_gmm(
    n: int,
    d: int,
    mu1: np.ndarray,
    mu2: np.ndarray,
    sigma1: PsdMatrix,
    sigma2: PsdMatrix,
    seed: int,
) -> GmmDataset:
    """Draw an ordered two-cluster GMM sample with uniform class halves."""
    if n % 2 != 0:
        raise ConfigError(f"n must be even (uniform class priors), got {n}")
    mu1 = np.asarray(mu1, dtype=float)
    mu2 = np.asarray(mu2, dtype=float)
    if mu1.shape != (d,) or mu2.shape != (d,):
        raise ConfigError("mean vectors must have length d")
    half = n // 2
    rows = []
    for i, (mu, sigma) in enumerate(((mu1, sigma1), (mu2, sigma2))):
        g = stream(seed, "gmm_G", i).standard_normal((half, d))
        rows.append(g @ sigma.sqrt() + mu)
    labels = np.concatenate([np.ones(half), -np.ones(half)])
    return GmmDataset(
        n=n,
        d=d,
        data=np.vstack(rows),
        labels=labels,
        mu1=mu1,
        mu2=mu2,
        sigma1=sigma1,
        sigma2=sigma2,
    )

"""Positive semi-definite covariance models.

Covariances parameterize every solver in the package.  Three kinds are
supported: isotropic ``sigma**2 * I``, spiked ``sigma**2 * I + nu nu^T``
(rank-one perturbation, spike either given explicitly or sampled
N(0, spike_sigma**2 I)), and a dense user-supplied matrix.

Matrices are symmetrized on construction and eigenvalues below
``-clamp_tol * max_eig`` are rejected; small negative jitter inside that
band is clamped to zero.  Square roots always go through a full symmetric
eigendecomposition; the rank-one closed form is reserved for test oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

__all__ = [
    "CovarianceError",
    "PsdMatrix",
    "CovarianceSpec",
    "build",
    "principal_sqrt",
    "solve_shifted",
]

# Relative eigenvalue clamping tolerance: sampled spiked matrices are exactly
# PSD but floating-point eigensolvers jitter.
DEFAULT_CLAMP_TOL = 1e-10
SYMMETRY_TOL = 1e-12


class CovarianceError(ValueError):
    """Invalid covariance construction or a singular shifted solve."""


@dataclass
class PsdMatrix:
    """Symmetric PSD matrix with a lazily cached principal square root.

    Immutable after construction: the square-root cache is a one-time fill,
    so instances can be shared across threads.  ``low_rank`` optionally
    records a ``(base_var, spike)`` pair when the matrix is known to be
    ``base_var * I + spike spike^T``; solvers may use it as a fast path but
    never rely on it for correctness.
    """

    dim: int
    entries: np.ndarray
    sqrt_cache: Optional[np.ndarray] = None
    low_rank: Optional[tuple[float, np.ndarray]] = None
    clamp_tol: float = DEFAULT_CLAMP_TOL

    @classmethod
    def from_dense(
        cls,
        entries: np.ndarray,
        clamp_tol: float = DEFAULT_CLAMP_TOL,
        low_rank: Optional[tuple[float, np.ndarray]] = None,
    ) -> "PsdMatrix":
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise CovarianceError(f"covariance must be square, got shape {entries.shape}")
        asym = np.abs(entries - entries.T)
        if asym.size and asym.max() > SYMMETRY_TOL * max(1.0, np.abs(entries).max()):
            i, j = np.unravel_index(np.argmax(asym), asym.shape)
            raise CovarianceError(
                f"covariance not symmetric: entries[{i},{j}]={entries[i, j]!r} "
                f"vs entries[{j},{i}]={entries[j, i]!r}"
            )
        sym = 0.5 * (entries + entries.T)
        eigvals = np.linalg.eigvalsh(sym)
        max_eig = max(eigvals[-1], 0.0)
        if eigvals[0] < -clamp_tol * max(max_eig, 1.0):
            raise CovarianceError(
                f"matrix has eigenvalue {eigvals[0]:.3e} below the PSD tolerance "
                f"{-clamp_tol * max(max_eig, 1.0):.3e}"
            )
        if eigvals[0] < 0.0:
            # Clamp sub-tolerance jitter to zero by a minimal diagonal shift.
            sym = sym - eigvals[0] * np.eye(sym.shape[0])
            sym = 0.5 * (sym + sym.T)
        return cls(dim=sym.shape[0], entries=sym, low_rank=low_rank, clamp_tol=clamp_tol)

    def sqrt(self) -> np.ndarray:
        """Principal square root; cached, so repeat calls are bit-identical."""
        if self.sqrt_cache is None:
            self.sqrt_cache = principal_sqrt(self)
        return self.sqrt_cache

    def eigvals(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


@dataclass(frozen=True)
class CovarianceSpec:
    """Declarative covariance description, serializable in harness configs.

    kind is one of:
      * "isotropic": sigma_base**2 * I
      * "spiked":    sigma_base**2 * I + nu nu^T, nu explicit (``spike``) or
                     sampled N(0, spike_sigma**2 I) using the provided seed
      * "dense":     explicit matrix
    """

    kind: str
    dim: int
    sigma_base: float = 0.0
    spike_sigma: Optional[float] = None
    spike: Optional[tuple[float, ...]] = None
    matrix: Optional[tuple[tuple[float, ...], ...]] = None

    def __post_init__(self):
        if self.kind not in ("isotropic", "spiked", "dense"):
            raise CovarianceError(f"unknown covariance kind {self.kind!r}")
        if self.dim <= 0:
            raise CovarianceError("dim must be positive")
        if self.sigma_base < 0:
            raise CovarianceError("sigma_base must be non-negative")
        if self.kind == "spiked":
            if (self.spike is None) == (self.spike_sigma is None):
                raise CovarianceError("spiked kind needs exactly one of spike, spike_sigma")
            if self.spike is not None and len(self.spike) != self.dim:
                raise CovarianceError(
                    f"spike length {len(self.spike)} does not match dim {self.dim}"
                )
        if self.kind == "dense" and self.matrix is None:
            raise CovarianceError("dense kind needs a matrix")


def build(spec: CovarianceSpec, rng_seed: Optional[int] = None) -> PsdMatrix:
    """Materialize a spec into a PsdMatrix.

    Sampled spikes require a seed; the realized spike vector is recorded on
    the result (``low_rank``) so the same draw can be reused across solvers.
    """
    d = spec.dim
    if spec.kind == "isotropic":
        base = spec.sigma_base**2
        return PsdMatrix.from_dense(base * np.eye(d), low_rank=(base, np.zeros(d)))
    if spec.kind == "spiked":
        if spec.spike is not None:
            nu = np.asarray(spec.spike, dtype=float)
        else:
            if rng_seed is None:
                raise CovarianceError("sampled spike requires rng_seed")
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(rng_seed)))
            nu = spec.spike_sigma * rng.standard_normal(d)
        base = spec.sigma_base**2
        return PsdMatrix.from_dense(
            base * np.eye(d) + np.outer(nu, nu), low_rank=(base, nu)
        )
    return PsdMatrix.from_dense(np.asarray(spec.matrix, dtype=float))


def principal_sqrt(m: PsdMatrix) -> np.ndarray:
    """Symmetric PSD square root via full eigendecomposition."""
    try:
        eigvals, eigvecs = np.linalg.eigh(m.entries)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(m.entries)
        raise CovarianceError(
            f"eigendecomposition failed (dim={m.dim}, cond={cond:.3e}): {exc}"
        ) from exc
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return 0.5 * (root + root.T)


def solve_shifted(m: PsdMatrix, shift: float, rhs: np.ndarray) -> np.ndarray:
    """Solve (shift * I + m) x = rhs through a Cholesky factorization.

    shift must be non-negative; shift == 0 requires m positive-definite.
    rhs may be a vector or a matrix of stacked right-hand sides.
    """
    if shift < 0:
        raise CovarianceError(f"shift must be non-negative, got {shift}")
    rhs = np.asarray(rhs, dtype=float)
    shifted = m.entries + shift * np.eye(m.dim)
    try:
        c, low = scipy.linalg.cho_factor(shifted, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise CovarianceError(
            f"shifted matrix singular or indefinite (shift={shift}): {exc}"
        ) from exc
    return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)

"""Separable convex losses, proximal operators, and Moreau envelopes.

The scalar-scaled envelope of a loss f is

    env_t(f)(x) = min_z f(z) + ||x - z||^2 / (2 t),        t > 0,

whose minimizer is the proximal point prox_t(f)(x).  All built-in losses are
separable, so generic envelopes reduce to componentwise scalar proxes.

Normalization ledger (each loss records its exact scale; auxiliary
objectives declare which variant they consume):

    half_sq : f(x) = 0.5 ||x||^2   prox_t(x) = x/(1+t)    env_t(x) = ||x||^2 / (2(1+t))
    sq      : f(x) = ||x||^2       prox_t(x) = x/(1+2t)   env_t(x) = ||x||^2 / (1+2t)
    abs     : f(x) = ||x||_1       soft threshold         Huber value

The regression objective uses half_sq per source with a ridge penalty
lam/(2d) ||theta||^2; the classification objective uses sq for both loss and
penalty with a bare lam multiplier.  The matrix-scaled quadratic envelope
handles the ridge penalty against an arbitrary PSD coupling matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .covariance import CovarianceError, PsdMatrix, solve_shifted

__all__ = [
    "SeparableLoss",
    "HALF_SQ",
    "SQ",
    "ABS",
    "BUILTIN_LOSSES",
    "loss_by_name",
    "moreau_envelope",
    "prox",
    "envelope_gradient",
    "MatrixScaledQuadEnvelope",
    "quad_matrix_envelope",
    "sqrt_trick_check",
]


def _require_positive_t(t: float) -> None:
    if not t > 0:
        raise ValueError(f"envelope scale t must be positive, got {t}")


@dataclass(frozen=True)
class SeparableLoss:
    """A separable convex function with value, prox, and envelope evaluators.

    ``scalar_prox(t, x)`` must return argmin_z f(z) + (x - z)^2/(2 t)
    componentwise; value and envelope follow from it.  ``env_value`` may
    supply a closed-form envelope; otherwise the envelope is assembled from
    the prox point.  ``smooth_gradient`` is set for differentiable losses.
    """

    name: str
    value: Callable[[np.ndarray], float]
    scalar_prox: Callable[[float, np.ndarray], np.ndarray]
    env_value: Optional[Callable[[float, np.ndarray], float]] = None
    smooth_gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def prox(self, t: float, x: np.ndarray) -> np.ndarray:
        _require_positive_t(t)
        return self.scalar_prox(t, np.asarray(x, dtype=float))

    def envelope(self, t: float, x: np.ndarray) -> float:
        _require_positive_t(t)
        x = np.asarray(x, dtype=float)
        if self.env_value is not None:
            return float(self.env_value(t, x))
        z = self.scalar_prox(t, x)
        return float(self.value(z) + np.sum((x - z) ** 2) / (2.0 * t))


HALF_SQ = SeparableLoss(
    name="half_sq",
    value=lambda x: 0.5 * float(np.sum(np.square(x))),
    scalar_prox=lambda t, x: x / (1.0 + t),
    env_value=lambda t, x: float(np.sum(np.square(x))) / (2.0 * (1.0 + t)),
    smooth_gradient=lambda x: x,
)

SQ = SeparableLoss(
    name="sq",
    value=lambda x: float(np.sum(np.square(x))),
    scalar_prox=lambda t, x: x / (1.0 + 2.0 * t),
    env_value=lambda t, x: float(np.sum(np.square(x))) / (1.0 + 2.0 * t),
    smooth_gradient=lambda x: 2.0 * x,
)


def _huber_value(t: float, x: np.ndarray) -> float:
    ax = np.abs(x)
    quad = ax <= t
    return float(np.sum(np.where(quad, 0.5 * x * x / t, ax - 0.5 * t)))


ABS = SeparableLoss(
    name="abs",
    value=lambda x: float(np.sum(np.abs(x))),
    scalar_prox=lambda t, x: np.sign(x) * np.maximum(np.abs(x) - t, 0.0),
    env_value=_huber_value,
)

BUILTIN_LOSSES = {loss.name: loss for loss in (HALF_SQ, SQ, ABS)}


def loss_by_name(name: str) -> SeparableLoss:
    """Look up a built-in loss by its config-file name."""
    try:
        return BUILTIN_LOSSES[name]
    except KeyError:
        raise KeyError(
            f"unknown loss {name!r}; built-ins are {sorted(BUILTIN_LOSSES)}"
        ) from None


def moreau_envelope(loss: SeparableLoss, t: float, x: np.ndarray) -> float:
    """min_z loss(z) + ||x - z||^2/(2t).  Closed form for built-ins."""
    return loss.envelope(t, x)


def prox(loss: SeparableLoss, t: float, x: np.ndarray) -> np.ndarray:
    """argmin_z loss(z) + ||x - z||^2/(2t), componentwise for separable losses."""
    return loss.prox(t, x)


def envelope_gradient(loss: SeparableLoss, t: float, x: np.ndarray) -> np.ndarray:
    """Gradient of the envelope in x: (x - prox_t(x)) / t."""
    _require_positive_t(t)
    x = np.asarray(x, dtype=float)
    return (x - loss.prox(t, x)) / t


@dataclass(frozen=True)
class MatrixScaledQuadEnvelope:
    """Quadratic-penalty envelope with a PSD coupling matrix.

    Evaluates min_theta (reg_lambda/2)||theta||^2
                        + (normalization/2) (theta - x)^T A (theta - x)
    for A = ``scale``.  With normalization = 1 this is the envelope of
    (reg_lambda/2)||.||^2 scaled by A^{-1}; the auxiliary regression
    objective consumes it with x = theta_star - A^{-1} b and multiplies the
    value by 1/d (its ridge is lam/(2d)||.||^2 against a (1/(2d)) coupling,
    so the two 1/d factors cancel into the effective reg_lambda = lam).
    """

    reg_lambda: float
    scale: PsdMatrix
    normalization: float = 1.0

    def __post_init__(self):
        if self.reg_lambda <= 0:
            raise ValueError("reg_lambda must be positive")
        if self.normalization <= 0:
            raise ValueError("normalization must be positive")


def quad_matrix_envelope(
    env: MatrixScaledQuadEnvelope, theta_star: np.ndarray, b: np.ndarray
) -> tuple[float, np.ndarray]:
    """Value and minimizer of the matrix-scaled quadratic envelope.

    The envelope is taken at x = theta_star - A^{-1} b, which collapses to
    the shifted solve (lam_eff I + A) theta = A theta_star - b with
    lam_eff = reg_lambda / normalization; the returned value is the envelope
    objective (normalization included) at that minimizer.
    """
    a = env.scale
    theta_star = np.asarray(theta_star, dtype=float)
    b = np.asarray(b, dtype=float)
    lam_eff = env.reg_lambda / env.normalization
    rhs = a.entries @ theta_star - b
    try:
        minimizer = solve_shifted(a, lam_eff, rhs)
    except CovarianceError as exc:
        raise CovarianceError(f"envelope solve singular: {exc}") from exc
    x = theta_star - solve_shifted(a, 0.0, b) if np.any(b) else theta_star
    diff = minimizer - x
    value = 0.5 * env.reg_lambda * float(minimizer @ minimizer) + 0.5 * env.normalization * float(
        diff @ (a.entries @ diff)
    )
    return value, minimizer


def sqrt_trick_check(x: float, grid_size: int = 200) -> float:
    """Evaluate min_{beta>0} 1/(2 beta) + beta x / 2, which equals sqrt(x).

    Test utility for the variational identity the auxiliary derivations rely
    on: a log-spaced beta grid bracket refined by golden-section search.
    """
    if not x > 0:
        raise ValueError(f"sqrt_trick_check requires x > 0, got {x}")

    def objective(log_beta: float) -> float:
        beta = np.exp(log_beta)
        return 0.5 / beta + 0.5 * beta * x

    # Bracket the minimum on a wide log grid, then golden-section.
    logs = np.linspace(np.log(1e-6), np.log(1e6), grid_size)
    values = [objective(u) for u in logs]
    i = int(np.argmin(values))
    lo = logs[max(i - 1, 0)]
    hi = logs[min(i + 1, grid_size - 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = objective(c), objective(d)
    for _ in range(200):
        if hi - lo < 1e-14:
            break
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = objective(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = objective(d)
    return objective(0.5 * (lo + hi))

"""Gaussian min-max pipeline.

Solvers for multi-source ridge regression and two-cluster GMM
classification, deterministic scalar auxiliary predictors of their
training/generalization/classification errors, and Monte-Carlo
verification of the Gaussian comparison inequalities and concentration
bounds that justify the predictions.
"""

from .covariance import CovarianceSpec, PsdMatrix, build, principal_sqrt, solve_shifted
from .losses import (
    ABS,
    HALF_SQ,
    SQ,
    MatrixScaledQuadEnvelope,
    SeparableLoss,
    envelope_gradient,
    loss_by_name,
    moreau_envelope,
    prox,
    quad_matrix_envelope,
    sqrt_trick_check,
)

__all__ = [
    "CovarianceSpec",
    "PsdMatrix",
    "build",
    "principal_sqrt",
    "solve_shifted",
    "SeparableLoss",
    "HALF_SQ",
    "SQ",
    "ABS",
    "loss_by_name",
    "moreau_envelope",
    "prox",
    "envelope_gradient",
    "MatrixScaledQuadEnvelope",
    "quad_matrix_envelope",
    "sqrt_trick_check",
]

__version__ = "0.1.0"

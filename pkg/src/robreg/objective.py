"""Empirical loss, derivatives, penalized objective, and the averaged
curvature matrix used by the support-recovery diagnostics.

The empirical loss for data (X, y) and a loss kernel l is

    L(beta) = (1/n) * sum_i l(y_i - x_i' beta),

with gradient -(1/n) * sum_i l'(r_i) x_i and Hessian
(1/n) * sum_i l''(r_i) x_i x_i'.  The penalized objective adds a weighted
l1 term lambda * sum_k w_k |beta_k|; coordinates with w_k = +inf are hard
zero constraints rather than penalties.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .losses import LossSpec, eval_ddloss, eval_dloss, eval_loss

# Below this residual-path spread the averaged-curvature weight falls back to
# the pointwise second derivative (the difference quotient would cancel).
_DEGENERATE_PATH_TOL = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Design matrix X (n rows of covariate vectors) and response y.

    Arrays are copied, coerced to float64 (X in Fortran order for fast
    column access) and frozen; a Dataset never changes after construction.
    """

    x: np.ndarray
    y: np.ndarray
    n: int = field(init=False)
    p: int = field(init=False)

    def __post_init__(self):
        x = np.asfortranarray(self.x, dtype=float)
        y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        if x.ndim != 2:
            raise ConfigurationError(f"X must be a 2-d matrix, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise ConfigurationError(
                f"X has {x.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ConfigurationError("X must have at least one row and one column")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ConfigurationError("X and y must not contain NaN or infinite entries")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", x.shape[0])
        object.__setattr__(self, "p", x.shape[1])


def uniform_weights(p: int) -> np.ndarray:
    """Unit penalty weights (plain LASSO)."""
    return np.ones(p)


def check_weights(w, p: int) -> np.ndarray:
    """Validate a penalty-weight vector: length p, entries in (0, +inf]."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != p:
        raise ConfigurationError(f"weights have length {w.shape[0]}, expected {p}")
    if np.any(np.isnan(w)) or np.any(w <= 0):
        raise ConfigurationError("penalty weights must be positive (or +inf)")
    return w


def _check_beta(beta, p: int) -> np.ndarray:
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.shape[0] != p:
        raise ConfigurationError(f"beta has length {beta.shape[0]}, expected {p}")
    return beta


def residuals(beta, data: Dataset) -> np.ndarray:
    return data.y - data.x @ _check_beta(beta, data.p)


def empirical_loss(beta, data: Dataset, spec: LossSpec) -> float:
    """Mean loss (1/n) sum_i l(y_i - x_i' beta)."""
    return float(np.mean(eval_loss(residuals(beta, data), spec)))


def empirical_gradient(beta, data: Dataset, spec: LossSpec) -> np.ndarray:
    """Gradient of the empirical loss: -(1/n) X' l'(r)."""
    r = residuals(beta, data)
    return -(data.x.T @ eval_dloss(r, spec)) / data.n


def empirical_hessian(beta, data: Dataset, spec: LossSpec) -> np.ndarray:
    """Dense Hessian (1/n) X' diag(l''(r)) X; for diagnostics at desk scale."""
    r = residuals(beta, data)
    d = eval_ddloss(r, spec)
    h = (data.x.T * d) @ data.x / data.n
    return (h + h.T) / 2.0


def weighted_l1(beta, w) -> float:
    """sum of w_k |beta_k| over finite-weight coordinates.

    Raises if beta is nonzero at a +inf-weight coordinate (those coordinates
    encode hard zero constraints).
    """
    beta = np.asarray(beta, dtype=float)
    w = np.asarray(w, dtype=float)
    frozen = ~np.isfinite(w)
    if np.any(beta[frozen] != 0.0):
        bad = np.flatnonzero(frozen & (beta != 0.0))
        raise ConfigurationError(
            f"beta must be zero at infinite-weight coordinates, violated at {bad.tolist()}"
        )
    return float(np.sum(w[~frozen] * np.abs(beta[~frozen])))


def penalized_objective(beta, data: Dataset, spec: LossSpec, lam: float, w) -> float:
    """Empirical loss plus lambda * sum_k w_k |beta_k| (finite weights only)."""
    if lam < 0:
        raise ConfigurationError(f"lambda must be nonnegative, got {lam}")
    w = check_weights(w, data.p)
    return empirical_loss(beta, data, spec) + lam * weighted_l1(_check_beta(beta, data.p), w)


def qhat_matrix(beta_a, beta_b, data: Dataset, spec: LossSpec):
    """Curvature of the empirical loss averaged along the segment from
    ``beta_a`` to ``beta_b``.

    Returns (Q, d) with Q = (2/n) X' diag(d) X and
    d_i = (1/2) * integral_0^1 l''(r_i(t)) dt, where
    r_i(t) = y_i - x_i' (beta_a + t (beta_b - beta_a)).  Since r_i is affine
    in t the integral has the closed form
    [l'(r_i(1)) - l'(r_i(0))] / (2 (r_i(1) - r_i(0))), used here exactly;
    when the endpoint residuals are closer than 1e-12 the pointwise value
    l''(r_i(0)) / 2 is used instead.  Q satisfies the mean-value identity
    Q (beta_b - beta_a) = grad L(beta_b) - grad L(beta_a).
    """
    r0 = residuals(beta_a, data)
    r1 = residuals(beta_b, data)
    dr = r1 - r0
    degenerate = np.abs(dr) < _DEGENERATE_PATH_TOL
    dr_safe = np.where(degenerate, 1.0, dr)
    d = np.where(
        degenerate,
        eval_ddloss(r0, spec) / 2.0,
        (eval_dloss(r1, spec) - eval_dloss(r0, spec)) / (2.0 * dr_safe),
    )
    q = 2.0 * (data.x.T * d) @ data.x / data.n
    q = (q + q.T) / 2.0
    return q, d

"""Scalar loss kernels (squared, Huber, pseudo-Huber) and their derivatives.

The pseudo-Huber kernel with robustification parameter ``alpha`` is

    l(x) = 2 * alpha**-2 * (sqrt(1 + alpha**2 * x**2) - 1),

smooth and strictly convex, quadratic near zero and asymptotically linear
with slope 2/alpha.  The Huber kernel is the classical piecewise form with
threshold 1/alpha, and the squared kernel is plain x**2 (the alpha -> 0
limit of both).  All evaluators accept scalars or numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

SQUARED = "squared"
HUBER = "huber"
PSEUDO_HUBER = "pseudo-huber"

LOSS_KINDS = (SQUARED, HUBER, PSEUDO_HUBER)


@dataclass(frozen=True)
class LossSpec:
    """Loss family plus robustification parameter (ignored for squared loss)."""

    kind: str
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigurationError(
                f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}"
            )
        if self.kind != SQUARED:
            if not np.isfinite(self.alpha) or self.alpha <= 0:
                raise ConfigurationError(
                    f"alpha must be a positive real for {self.kind} loss, got {self.alpha}"
                )


def squared() -> LossSpec:
    return LossSpec(SQUARED)


def huber(alpha: float) -> LossSpec:
    return LossSpec(HUBER, alpha)


def pseudo_huber(alpha: float) -> LossSpec:
    return LossSpec(PSEUDO_HUBER, alpha)


def eval_loss(x, spec: LossSpec):
    """Loss value at residual ``x``; nonnegative and zero only at x = 0.

    The pseudo-Huber value is computed as 2*x**2 / (1 + hypot(1, alpha*x)),
    which is algebraically identical to the defining formula but avoids both
    the cancellation in sqrt(1 + t**2) - 1 for small t and overflow of
    (alpha*x)**2 for large arguments.
    """
    x = np.asarray(x, dtype=float)
    if spec.kind == SQUARED:
        return x * x
    a = spec.alpha
    if spec.kind == PSEUDO_HUBER:
        return 2.0 * x * x / (1.0 + np.hypot(1.0, a * x))
    # Huber: quadratic inside |x| <= 1/alpha, linear outside.
    c = 1.0 / a
    ax = np.abs(x)
    return np.where(ax <= c, x * x, 2.0 * ax / a - c * c)


def eval_dloss(x, spec: LossSpec):
    """First derivative of the loss; odd in x, bounded by 2/alpha for the
    robust kernels."""
    x = np.asarray(x, dtype=float)
    if spec.kind == SQUARED:
        return 2.0 * x
    a = spec.alpha
    if spec.kind == PSEUDO_HUBER:
        return 2.0 * x / np.hypot(1.0, a * x)
    c = 1.0 / a
    return np.where(np.abs(x) <= c, 2.0 * x, 2.0 * np.sign(x) / a)


def eval_ddloss(x, spec: LossSpec):
    """Second derivative of the loss; lies in (0, 2] for pseudo-Huber, in
    {0, 2} for Huber, and equals 2 identically for squared loss."""
    x = np.asarray(x, dtype=float)
    if spec.kind == SQUARED:
        return np.full_like(x, 2.0)
    a = spec.alpha
    if spec.kind == PSEUDO_HUBER:
        return 2.0 / np.hypot(1.0, a * x) ** 3
    return np.where(np.abs(x) <= 1.0 / a, 2.0, 0.0)


def loss_difference(x_new, x_old, spec: LossSpec):
    """Elementwise l(x_new) - l(x_old), evaluated without cancellation.

    Used by the solver's per-coordinate descent checks, where the two
    arguments are typically close and a naive difference of near-equal loss
    values would lose all significant digits.
    """
    x_new = np.asarray(x_new, dtype=float)
    x_old = np.asarray(x_old, dtype=float)
    if spec.kind == SQUARED:
        return (x_new - x_old) * (x_new + x_old)
    a = spec.alpha
    if spec.kind == PSEUDO_HUBER:
        # l(u) - l(v) = 2 (u-v)(u+v) / (hypot(1, a*u) + hypot(1, a*v))
        return (
            2.0
            * (x_new - x_old)
            * (x_new + x_old)
            / (np.hypot(1.0, a * x_new) + np.hypot(1.0, a * x_old))
        )
    return eval_loss(x_new, spec) - eval_loss(x_old, spec)

"""Support-recovery diagnostics.

``pdw_check`` runs the primal-dual certificate construction: solve the
program restricted to a candidate support, extract the subgradient vector
implied by stationarity, and measure how far the off-support coordinates
are from the dual-feasibility boundary.  A strictly positive margin
certifies that the restricted solution is the unique solution of the full
program, which is verified directly by solving the full program as well.

``mutual_incoherence`` and ``min_eig_ss`` expose the two matrix conditions
the certificate depends on, computed from the averaged-curvature matrix and
the restricted Hessian.  ``support_metrics`` scores an estimate against the
true coefficient vector (errors, false positives/negatives, sign match).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericalError
from .losses import LossSpec
from .objective import Dataset, check_weights, empirical_gradient, empirical_hessian, qhat_matrix
from .solver import SolverConfig, solve


@dataclass
class SupportMetrics:
    """Accuracy of an estimate relative to the true coefficient vector."""

    l2_error: float
    linf_error: float
    fp_pct: float
    fn_pct: float
    sign_consistent: bool
    fn_undefined: bool = False


def support_metrics(beta_hat, beta_star) -> SupportMetrics:
    """Errors and selection rates of beta_hat against beta_star.

    fp_pct is the percentage of zero coordinates of beta_star estimated
    nonzero, fn_pct the percentage of nonzero coordinates estimated zero.
    A beta_star without any nonzero entry leaves fn undefined; it is
    reported as 0 with ``fn_undefined=True``.
    """
    beta_hat = np.asarray(beta_hat, dtype=float).reshape(-1)
    beta_star = np.asarray(beta_star, dtype=float).reshape(-1)
    if beta_hat.shape != beta_star.shape:
        raise ConfigurationError("beta_hat and beta_star must have equal length")
    diff = beta_hat - beta_star
    signal = beta_star != 0.0
    noise = ~signal
    n_signal = int(signal.sum())
    n_noise = int(noise.sum())
    fp = 100.0 * float(np.sum(beta_hat[noise] != 0.0)) / n_noise if n_noise else 0.0
    fn_undefined = n_signal == 0
    fn = 0.0 if fn_undefined else 100.0 * float(np.sum(beta_hat[signal] == 0.0)) / n_signal
    return SupportMetrics(
        l2_error=float(np.linalg.norm(diff)),
        linf_error=float(np.max(np.abs(diff))) if diff.size else 0.0,
        fp_pct=fp,
        fn_pct=fn,
        sign_consistent=bool(np.array_equal(np.sign(beta_hat), np.sign(beta_star))),
        fn_undefined=fn_undefined,
    )


def mutual_incoherence(qhat, support) -> float:
    """Max-row-l1 norm of Q[off,S] Q[S,S]^{-1}.

    Zero for block-diagonal Q; values below 1 leave room for the
    dual-feasibility certificate.  Raises NumericalError when Q[S,S] is
    singular, reporting its condition estimate.
    """
    qhat = np.asarray(qhat, dtype=float)
    support = np.asarray(support, dtype=int).reshape(-1)
    p = qhat.shape[0]
    if qhat.shape != (p, p):
        raise ConfigurationError("qhat must be square")
    if support.size == 0:
        raise ConfigurationError("support must be nonempty")
    off = np.setdiff1d(np.arange(p), support)
    if off.size == 0:
        return 0.0
    q_ss = qhat[np.ix_(support, support)]
    q_s_off = qhat[np.ix_(support, off)]
    try:
        a = np.linalg.solve(q_ss, q_s_off)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"restricted curvature block is singular (cond ~ {np.linalg.cond(q_ss):.3e})"
        ) from exc
    # rows of Q[off,S] Q[S,S]^{-1} are columns of the solve above
    return float(np.max(np.sum(np.abs(a), axis=0)))


def min_eig_ss(hessian, support) -> float:
    """Smallest eigenvalue of the principal submatrix indexed by support."""
    hessian = np.asarray(hessian, dtype=float)
    support = np.asarray(support, dtype=int).reshape(-1)
    if support.size == 0:
        raise ConfigurationError("support must be nonempty")
    sub = hessian[np.ix_(support, support)]
    return float(np.linalg.eigvalsh(sub)[0])


@dataclass
class PDWReport:
    """Outcome of the primal-dual certificate construction."""

    restricted_beta: np.ndarray
    gamma: np.ndarray
    dual_feasibility_margin: float
    full_matches_restricted: bool
    incoherence: float
    min_eig_SS: float
    notes: tuple = ()

    def to_json(self) -> str:
        payload = {
            "restricted_beta": self.restricted_beta.tolist(),
            "gamma": self.gamma.tolist(),
            "dual_feasibility_margin": self.dual_feasibility_margin,
            "full_matches_restricted": self.full_matches_restricted,
            "incoherence": self.incoherence,
            "min_eig_SS": self.min_eig_SS,
            "notes": list(self.notes),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PDWReport":
        obj = json.loads(text)
        return cls(
            restricted_beta=np.asarray(obj["restricted_beta"], dtype=float),
            gamma=np.asarray(obj["gamma"], dtype=float),
            dual_feasibility_margin=obj["dual_feasibility_margin"],
            full_matches_restricted=obj["full_matches_restricted"],
            incoherence=obj["incoherence"],
            min_eig_SS=obj["min_eig_SS"],
            notes=tuple(obj.get("notes", ())),
        )


def pdw_check(
    data: Dataset,
    spec: LossSpec,
    lam: float,
    w,
    support,
    cfg: SolverConfig | None = None,
) -> PDWReport:
    """Run the restricted-program certificate for a candidate support.

    Solves the program restricted to ``support`` (all other coordinates
    forced to zero), forms gamma_k = -(grad L)_k / (lambda w_k) at the
    restricted solution, and reports the margin
    1 - max off-support |gamma_k| over finite-weight coordinates.  The full
    program is solved independently; ``full_matches_restricted`` records
    whether the two solutions agree within 10 * kkt_tol in sup-norm.  The
    incoherence statistic uses the curvature matrix averaged between the two
    solutions, and ``min_eig_SS`` the restricted Hessian at the restricted
    solution.
    """
    if cfg is None:
        cfg = SolverConfig()
    if lam <= 0:
        raise ConfigurationError("pdw_check requires lambda > 0")
    w = check_weights(w, data.p)
    support = np.asarray(support, dtype=int).reshape(-1)
    if np.any(support < 0) or np.any(support >= data.p):
        raise ConfigurationError("support indices out of range")
    if not np.all(np.isfinite(w[support])):
        raise ConfigurationError("weights must be finite on the candidate support")
    notes = []

    w_restricted = np.full(data.p, np.inf)
    w_restricted[support] = w[support]
    restricted = solve(data, spec, lam, w_restricted, cfg)
    if not restricted.converged:
        notes.append("restricted solve did not reach its tolerances")

    grad = empirical_gradient(restricted.beta, data, spec)
    finite = np.isfinite(w)
    gamma = np.zeros(data.p)
    gamma[finite] = -grad[finite] / (lam * w[finite])

    off_mask = finite.copy()
    off_mask[support] = False
    if np.any(off_mask):
        margin = 1.0 - float(np.max(np.abs(gamma[off_mask])))
    else:
        margin = 1.0

    full_cfg = SolverConfig(
        max_sweeps=cfg.max_sweeps,
        tol=cfg.tol,
        kkt_tol=cfg.kkt_tol,
        c_beta=cfg.c_beta,
        active_set=cfg.active_set,
        warm_start=None,
    )
    full = solve(data, spec, lam, w, full_cfg)
    if not full.converged:
        notes.append("full solve did not reach its tolerances")
    full_matches = bool(
        np.max(np.abs(full.beta - restricted.beta)) <= 10.0 * cfg.kkt_tol
    )

    if support.size:
        qhat, _ = qhat_matrix(restricted.beta, full.beta, data, spec)
        try:
            incoherence = mutual_incoherence(qhat, support)
        except NumericalError as exc:
            incoherence = float("nan")
            notes.append(f"incoherence undefined: {exc}")
        hess = empirical_hessian(restricted.beta, data, spec)
        eig = min_eig_ss(hess, support)
        if eig <= 0:
            notes.append("restricted Hessian is not positive definite; margin unreliable")
    else:
        incoherence = float("nan")
        eig = float("nan")
        notes.append("empty candidate support; matrix statistics undefined")

    return PDWReport(
        restricted_beta=restricted.beta,
        gamma=gamma,
        dual_feasibility_margin=margin,
        full_matches_restricted=full_matches,
        incoherence=incoherence,
        min_eig_SS=eig,
        notes=tuple(notes),
    )

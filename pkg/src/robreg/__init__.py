"""Robust high-dimensional mean regression.

Weighted/adaptive LASSO with squared, Huber, or pseudo-Huber loss; a
coordinate-descent solver with KKT certificates; primal-dual support
diagnostics; and a seeded Monte Carlo benchmark harness.
"""
from .errors import ConfigurationError, NumericalError
from .losses import (
    HUBER,
    PSEUDO_HUBER,
    SQUARED,
    LossSpec,
    eval_ddloss,
    eval_dloss,
    eval_loss,
    huber,
    loss_difference,
    pseudo_huber,
    squared,
)
from .objective import (
    Dataset,
    empirical_gradient,
    empirical_hessian,
    empirical_loss,
    penalized_objective,
    qhat_matrix,
    uniform_weights,
)
from .solver import FitResult, SolverConfig, prox_weighted_l1, project_l2_ball, solve
from .estimators import (
    AdaptiveFitResult,
    ESTIMATOR_LABELS,
    EstimatorPipeline,
    adaptive_weights,
    display_to_canonical_lambda,
    fit_adaptive,
    make_pipeline,
    scale_alpha,
    scale_lambda_adaptive,
    threshold_support,
)
from .diagnostics import (
    PDWReport,
    SupportMetrics,
    min_eig_ss,
    mutual_incoherence,
    pdw_check,
    support_metrics,
)
from .simulation import (
    NormalErrors,
    REFERENCE_TUNING,
    Scenario,
    SimReport,
    SkewTErrors,
    StudentTErrors,
    builtin_scenario,
    format_table,
    gen_design,
    gen_errors,
    grid_search,
    heteroscedastic_scale,
    reference_pipeline,
    replication_data,
    run_monte_carlo,
    sample_skew_t,
    skew_t_mean,
    standard_beta_star,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "NumericalError",
    "LossSpec",
    "SQUARED",
    "HUBER",
    "PSEUDO_HUBER",
    "squared",
    "huber",
    "pseudo_huber",
    "eval_loss",
    "eval_dloss",
    "eval_ddloss",
    "loss_difference",
    "Dataset",
    "uniform_weights",
    "empirical_loss",
    "empirical_gradient",
    "empirical_hessian",
    "penalized_objective",
    "qhat_matrix",
    "SolverConfig",
    "FitResult",
    "prox_weighted_l1",
    "project_l2_ball",
    "solve",
    "AdaptiveFitResult",
    "adaptive_weights",
    "threshold_support",
    "scale_alpha",
    "scale_lambda_adaptive",
    "fit_adaptive",
    "EstimatorPipeline",
    "ESTIMATOR_LABELS",
    "make_pipeline",
    "display_to_canonical_lambda",
    "PDWReport",
    "SupportMetrics",
    "pdw_check",
    "mutual_incoherence",
    "min_eig_ss",
    "support_metrics",
    "Scenario",
    "SimReport",
    "NormalErrors",
    "StudentTErrors",
    "SkewTErrors",
    "builtin_scenario",
    "standard_beta_star",
    "REFERENCE_TUNING",
    "reference_pipeline",
    "gen_design",
    "gen_errors",
    "heteroscedastic_scale",
    "sample_skew_t",
    "skew_t_mean",
    "replication_data",
    "run_monte_carlo",
    "grid_search",
    "format_table",
]

"""Weighted, cross-fitted, debiased Lasso for treatment effect modifiers.

Estimates the coefficients of a linear conditional average treatment
effect model in high dimensions and attaches honest per-coefficient
confidence intervals.  The pipeline: cross-fitted doubly robust
pseudo-outcomes, conditional variance weighting, an l1-penalized
selection stage, and a nodewise-regression debiasing step.
"""

from .data import GroundTruth, ObservationSet, read_csv, validate, write_csv
from .dgp import DgpConfig, generate, true_cate, true_nuisances
from .errors import DataError, NumericalError
from .estimator import WtdlCate, WtdlResult, fit_wtdl
from .inference import (
    CompatibilityAudit,
    InferenceDiagnostics,
    WtdlEstimate,
    compatibility_constant,
    confidence_intervals,
    debias,
    diagnostics,
    dr_catelasso_no_crossfit,
    normal_quantile,
    oracle_estimator,
    standard_errors,
)
from .lasso import LassoFit, fit_lasso, kkt_check, select_lambda, soft_threshold
from .nodewise import NodewiseInverse, build_theta, nodewise_column, select_nodewise_lambda
from .nuisance import (
    FoldAssignment,
    LinearModel,
    LogisticModel,
    NuisanceFit,
    NuisanceModels,
    NuisanceSettings,
    assign_folds,
    cross_fit,
    fit_all,
    fit_outcome,
    fit_propensity,
)
from .scores import (
    WeightedProblem,
    build_pseudo_outcomes,
    build_weighted,
    dr_score,
    estimate_weights,
    pseudo_outcomes_single,
    true_weights,
    weights_single,
)
from .simulation import (
    ReplicationRecord,
    SimulationReport,
    StudyConfig,
    desk_config,
    estimate_from_csv,
    run_replication,
    run_study,
    write_report,
)

__version__ = "0.1.0"

__all__ = [
    "ObservationSet",
    "GroundTruth",
    "validate",
    "read_csv",
    "write_csv",
    "DataError",
    "NumericalError",
    "DgpConfig",
    "generate",
    "true_cate",
    "true_nuisances",
    "FoldAssignment",
    "LinearModel",
    "LogisticModel",
    "NuisanceModels",
    "NuisanceFit",
    "NuisanceSettings",
    "assign_folds",
    "cross_fit",
    "fit_all",
    "fit_outcome",
    "fit_propensity",
    "WeightedProblem",
    "dr_score",
    "build_pseudo_outcomes",
    "pseudo_outcomes_single",
    "estimate_weights",
    "weights_single",
    "true_weights",
    "build_weighted",
    "LassoFit",
    "soft_threshold",
    "fit_lasso",
    "kkt_check",
    "select_lambda",
    "NodewiseInverse",
    "nodewise_column",
    "build_theta",
    "select_nodewise_lambda",
    "WtdlEstimate",
    "InferenceDiagnostics",
    "CompatibilityAudit",
    "normal_quantile",
    "debias",
    "standard_errors",
    "confidence_intervals",
    "oracle_estimator",
    "dr_catelasso_no_crossfit",
    "diagnostics",
    "compatibility_constant",
    "WtdlResult",
    "fit_wtdl",
    "WtdlCate",
    "StudyConfig",
    "ReplicationRecord",
    "SimulationReport",
    "desk_config",
    "run_replication",
    "run_study",
    "write_report",
    "estimate_from_csv",
]

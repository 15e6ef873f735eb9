"""Higher-order-accurate inference for stratified models with many nuisance
parameters: likelihood pivots, parametric bootstrap p-values, moment-adjusted
statistics, the modified signed root r*, and a Monte Carlo experiment harness.
"""

from ._core import (
    BootstrapResult,
    Dataset,
    FitError,
    FitResult,
    InvalidInput,
    ParamPoint,
    PivotSet,
    RStarResult,
    constrained_pvalue,
    default_truths,
    fit_constrained,
    fit_mle,
    pivots,
    rstar,
    run_experiment_json,
    simulate,
    unconstrained_pvalue,
)

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "Dataset",
    "FitError",
    "FitResult",
    "InvalidInput",
    "ParamPoint",
    "PivotSet",
    "RStarResult",
    "constrained_pvalue",
    "default_truths",
    "fit_constrained",
    "fit_mle",
    "pivots",
    "rstar",
    "run_experiment_json",
    "simulate",
    "unconstrained_pvalue",
]

"""pairlearn: regularized pairwise learning in an RKHS, with robustness
diagnostics (influence functions, sensitivity curves, maxbias probes,
bootstrap stability)."""

from .estimator import PairwiseKernelRegressor
from .exceptions import ConvergenceWarning, NumericFailureError, UnsupportedLossError
from .kernels import (
    Kernel,
    RkhsFunction,
    evaluate,
    gram_matrix,
    h_norm,
    h_norm_sq,
    kernel_eval,
    load_precomputed_kernel,
    sup_norm,
)
from .losses import (
    LOSS_FAMILIES,
    LossConstants,
    PairwiseLoss,
    make_loss,
    modulus_of_continuity_probe,
)
from .risk import (
    Dataset,
    RiskReport,
    empirical_risk,
    empirical_shifted_risk,
    regularized_risk,
    risk_gradient_coeffs,
    risk_hessian_coeffs,
)
from .robustness import (
    DiscreteMeasure,
    InfluenceResult,
    MaxbiasReport,
    bootstrap_distribution,
    contaminate,
    default_contamination_grid,
    gateaux_derivative,
    h_norm_of_difference,
    influence_function,
    maxbias_probe,
    product_measure,
    sensitivity_curve,
    stability_bound_check,
    total_variation,
)
from .solver import (
    FittedModel,
    SolverOptions,
    apriori_bound_checks,
    fit,
    fit_ls_closed_form,
    load_model,
    model_from_dict,
    model_to_dict,
    predict,
    save_model,
    stationarity_residual,
)

__version__ = "0.1.0"

__all__ = [
    "PairwiseKernelRegressor",
    "ConvergenceWarning",
    "NumericFailureError",
    "UnsupportedLossError",
    "Kernel",
    "RkhsFunction",
    "evaluate",
    "gram_matrix",
    "h_norm",
    "h_norm_sq",
    "kernel_eval",
    "load_precomputed_kernel",
    "sup_norm",
    "LOSS_FAMILIES",
    "LossConstants",
    "PairwiseLoss",
    "make_loss",
    "modulus_of_continuity_probe",
    "Dataset",
    "RiskReport",
    "empirical_risk",
    "empirical_shifted_risk",
    "regularized_risk",
    "risk_gradient_coeffs",
    "risk_hessian_coeffs",
    "DiscreteMeasure",
    "InfluenceResult",
    "MaxbiasReport",
    "bootstrap_distribution",
    "contaminate",
    "default_contamination_grid",
    "gateaux_derivative",
    "h_norm_of_difference",
    "influence_function",
    "maxbias_probe",
    "product_measure",
    "sensitivity_curve",
    "stability_bound_check",
    "total_variation",
    "FittedModel",
    "SolverOptions",
    "apriori_bound_checks",
    "fit",
    "fit_ls_closed_form",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "save_model",
    "stationarity_residual",
]

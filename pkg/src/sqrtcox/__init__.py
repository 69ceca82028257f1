"""Sparse Cox regression with a square-root partial likelihood.

The penalty level is calibrated by the quantile universal threshold, so the
estimator returns an empty model with probability ``1 - alpha`` when no
covariate influences survival.
"""

from .ann import NetworkCoxModel, fit_network, forward, init_network
from .coxcore import (
    BaselineHazard,
    LinearCoxModel,
    RiskSetIndex,
    breslow,
    build_risk_index,
    gradient_wrt_mu,
    log_partial_likelihood,
    predict_survival,
    sqrt_neg_loss,
    sqrt_neg_loss_gradient,
)
from .data import (
    Standardization,
    SurvivalDataset,
    apply_standardization,
    load_csv,
    standardize,
    write_csv,
)
from .errors import DataError, DegenerateLikelihoodError, NumericalError
from .penalty import PenaltySpec, penalty_value, prox, rho
from .metrics import SupportMetrics, concordance_index, support_metrics
from .optimizer import FitReport, PathSchedule, build_schedule, fit_linear
from .pipeline import FitConfig, PipelineResult, fit_pipeline
from .qut import (
    QutConfig,
    QutResult,
    lambda0,
    qut_bootstrap,
    qut,
    qut_gaussian,
    rescale_for_network,
)
from .simulate import BenchmarkReport, SimConfig, generate, generate_test, run_benchmark

__version__ = "0.1.0"

__all__ = [
    "BaselineHazard",
    "BenchmarkReport",
    "DataError",
    "DegenerateLikelihoodError",
    "FitConfig",
    "FitReport",
    "LinearCoxModel",
    "NetworkCoxModel",
    "NumericalError",
    "PathSchedule",
    "PenaltySpec",
    "PipelineResult",
    "QutConfig",
    "QutResult",
    "RiskSetIndex",
    "SimConfig",
    "Standardization",
    "SupportMetrics",
    "SurvivalDataset",
    "apply_standardization",
    "breslow",
    "build_risk_index",
    "build_schedule",
    "concordance_index",
    "fit_linear",
    "fit_network",
    "fit_pipeline",
    "forward",
    "generate",
    "generate_test",
    "gradient_wrt_mu",
    "init_network",
    "lambda0",
    "load_csv",
    "log_partial_likelihood",
    "penalty_value",
    "predict_survival",
    "prox",
    "qut",
    "qut_bootstrap",
    "qut_gaussian",
    "rescale_for_network",
    "rho",
    "run_benchmark",
    "sqrt_neg_loss",
    "sqrt_neg_loss_gradient",
    "standardize",
    "support_metrics",
    "write_csv",
]

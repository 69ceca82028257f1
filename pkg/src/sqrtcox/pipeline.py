"""End-to-end estimator: standardize, calibrate the penalty by QUT, fit."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .ann import KAPPA, NetworkCoxModel, fit_network
from .coxcore import LinearCoxModel
from .data import Standardization, SurvivalDataset, standardize
from .optimizer import MODES, FitReport, build_schedule, fit_linear
from .qut import QutConfig, QutResult, qut, rescale_for_network

MODELS = ("linear", "network")


@dataclass(frozen=True)
class FitConfig:
    """Options of :func:`fit_pipeline`.

    ``lam`` bypasses QUT and is used as the final penalty level directly
    (on the model's own scale, i.e. after any network rescaling).
    """

    mode: str = "harder"
    model: str = "linear"
    hidden: tuple = (20,)
    activation: str = "relu"
    alpha: float = 0.05
    qut_method: str = "gaussian"
    qut_replicates: int = 1000
    lam: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.activation not in KAPPA:
            raise ValueError(f"unknown activation {self.activation!r}")
        if any(int(h) < 1 for h in self.hidden):
            raise ValueError("hidden widths must be positive")
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lambda must be positive")
        # validated here so errors surface before any work is done
        QutConfig(self.alpha, self.qut_replicates, self.qut_method, self.seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out


@dataclass
class PipelineResult:
    model: LinearCoxModel | NetworkCoxModel
    report: FitReport
    standardization: Standardization
    qut: QutResult | None
    lambda_used: float


def network_widths(p: int, hidden: Sequence[int]) -> tuple[int, ...]:
    """Input widths of the weight layers of a ``p -> hidden -> 1`` network."""
    return (p, *(int(h) for h in hidden))


def penalty_level(d_std: SurvivalDataset, cfg: FitConfig) -> tuple[float, QutResult | None]:
    """Final penalty level for ``cfg`` on standardized data."""
    if cfg.lam is not None:
        return float(cfg.lam), None
    res = qut(d_std, QutConfig(cfg.alpha, cfg.qut_replicates, cfg.qut_method, cfg.seed))
    lam = res.lambda_qut
    if cfg.model == "network":
        lam = rescale_for_network(lam, network_widths(d_std.p, cfg.hidden), KAPPA[cfg.activation])
    return lam, res


def fit_pipeline(d: SurvivalDataset, cfg: FitConfig = FitConfig()) -> PipelineResult:
    """Standardize ``d`` (raw scale), pick the penalty, run the annealed fit.

    The returned model maps raw covariates to log-risk.
    """
    ds, std = standardize(d)
    lam, res = penalty_level(ds, cfg)
    schedule = build_schedule(lam, cfg.mode)
    if cfg.model == "linear":
        model, report = fit_linear(ds, schedule, standardization=std)
    else:
        model, report = fit_network(ds, schedule, cfg.hidden, cfg.activation, cfg.seed,
                                    standardization=std)
    return PipelineResult(model, report, std, res, lam)

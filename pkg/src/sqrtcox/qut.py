"""Zero-thresholding function and quantile universal threshold (QUT).

``lambda0(y, c; X)`` is the smallest penalty for which ``theta = 0`` is a
minimum of the square-root Cox objective. Under the global null its
distribution, given ``X``, is asymptotically free of the censoring rate, so
its upper quantile can be estimated either from a Gaussian limit or by
bootstrapping the ``(y, c)`` pairs against the fixed design.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coxcore import RiskSetIndex, build_risk_index
from .data import SurvivalDataset
from .errors import DataError, DegenerateLikelihoodError, NumericalError

METHODS = ("gaussian", "bootstrap")


@dataclass(frozen=True)
class QutConfig:
    alpha: float = 0.05
    replicates: int = 1000
    method: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in the open interval (0, 1), got {self.alpha}")
        if int(self.replicates) != self.replicates or self.replicates < 100:
            raise ValueError(f"replicates must be an integer >= 100, got {self.replicates}")
        if self.method not in METHODS:
            raise ValueError(f"unknown QUT method {self.method!r}")


@dataclass
class QutResult:
    lambda_qut: float
    lambda_samples: np.ndarray
    method: str
    seed: int
    alpha: float
    redraws: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self, include_samples: bool = False) -> dict:
        out = {
            "lambda_qut": self.lambda_qut,
            "alpha": self.alpha,
            "m": int(self.lambda_samples.shape[0]),
            "method": self.method,
            "seed": self.seed,
            "redraws": self.redraws,
        }
        out.update(self.extra)
        if include_samples:
            out["samples"] = self.lambda_samples.tolist()
        return out


def upper_quantile(samples, alpha: float) -> float:
    """Order statistic of rank ``ceil((1 - alpha) m)``."""
    s = np.sort(np.asarray(samples, dtype=float))
    m = s.shape[0]
    # the small offset keeps e.g. 0.95 * 1000 from rounding up to 951
    rank = min(max(math.ceil((1.0 - alpha) * m - 1e-9), 1), m)
    return float(s[rank - 1])


def null_score(d: SurvivalDataset, idx: RiskSetIndex) -> tuple[np.ndarray, float]:
    """Gradient of the log partial likelihood in ``theta`` at 0, and ``-l(0)``.

    The gradient is ``sum_i c_i (x_i - mean of x over the risk set of i)``
    and ``-l(0) = sum_i c_i log N_i``.
    """
    X = d.covariates[idx.ordering]
    c = idx.sorted_events
    N = idx.block_last + 1
    risk_means = np.cumsum(X, axis=0)[idx.block_last] / N[:, None]
    score = c @ (X - risk_means)
    neg_ll0 = float(np.sum(c * np.log(N)))
    return score, neg_ll0


def lambda0(d: SurvivalDataset, idx: RiskSetIndex | None = None) -> float:
    """Zero-thresholding function ``||grad l(0)||_inf / (2 sqrt(-l(0)))``."""
    if idx is None:
        idx = build_risk_index(d)
    if not np.any(d.events):
        raise DegenerateLikelihoodError("all subjects censored: -l(0) = 0")
    score, neg_ll0 = null_score(d, idx)
    if not neg_ll0 > 0:
        raise DegenerateLikelihoodError("-l(0) = 0: no event has a risk set larger than one")
    return float(np.max(np.abs(score)) / (2.0 * math.sqrt(neg_ll0)))


def _replicate_rngs(seed: int, m: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(m)]


def covariance_factor(X: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Symmetric PSD square root of ``X^T X / n`` with eigenvalues clipped at 0."""
    n = X.shape[0]
    w, V = np.linalg.eigh(X.T @ X / n)
    w = np.where(w > tol * max(w.max(), 1.0), w, 0.0)
    return (V * np.sqrt(w)) @ V.T


def qut_gaussian(X, cfg: QutConfig = QutConfig()) -> QutResult:
    """QUT from the Gaussian limit ``2 sqrt(log n) Lambda -> ||N(0, X^T X / n)||_inf``.

    Each replicate draws from its own child seed, so samples do not depend
    on evaluation order.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if n < 2:
        raise DataError("n < 2")
    F = covariance_factor(X)
    p = X.shape[1]
    draws = np.stack([rng.standard_normal(p) for rng in _replicate_rngs(cfg.seed, cfg.replicates)])
    samples = np.max(np.abs(draws @ F), axis=1) / (2.0 * math.sqrt(math.log(n)))
    return QutResult(upper_quantile(samples, cfg.alpha), samples, "gaussian", cfg.seed, cfg.alpha)


def qut_bootstrap(d: SurvivalDataset, cfg: QutConfig = QutConfig(method="bootstrap")) -> QutResult:
    """QUT by resampling ``(y_i, c_i)`` pairs with replacement against the fixed X.

    Resamples with ``-l(0) = 0`` (no usable event) are redrawn; if more
    redraws than half the replicate count are needed the event rate is too
    low for this method.
    """
    if not np.any(d.events):
        raise DataError("no observed events; bootstrap QUT needs at least one")
    n = d.n
    X = d.covariates
    samples = np.empty(cfg.replicates)
    redraws = 0
    budget = cfg.replicates // 2
    for k, rng in enumerate(_replicate_rngs(cfg.seed, cfg.replicates)):
        while True:
            pick = rng.integers(0, n, size=n)
            boot = SurvivalDataset(d.times[pick], d.events[pick], X, d.feature_names)
            idx = build_risk_index(boot)
            score, neg_ll0 = null_score(boot, idx)
            if neg_ll0 > 0:
                break
            redraws += 1
            if redraws > budget:
                raise NumericalError(
                    "more than half of the bootstrap resamples had no usable event; "
                    "use the gaussian method"
                )
        samples[k] = np.max(np.abs(score)) / (2.0 * math.sqrt(neg_ll0))
    return QutResult(
        upper_quantile(samples, cfg.alpha), samples, "bootstrap", cfg.seed, cfg.alpha, redraws
    )


def qut(d: SurvivalDataset, cfg: QutConfig) -> QutResult:
    """Dispatch on ``cfg.method``; ``d`` must already be standardized."""
    if cfg.method == "gaussian":
        return qut_gaussian(d.covariates, cfg)
    return qut_bootstrap(d, cfg)


def rescale_for_network(lambda_qut: float, widths: Sequence[int], kappa: float = 1.0) -> float:
    """Network threshold ``kappa**(L-1) * pi_L * lambda_qut``.

    ``widths`` are the input widths ``p_1..p_L`` of the ``L`` weight layers
    (``p_1`` is the number of covariates), and
    ``pi_L = sqrt(prod_{j=3..L} p_j)``. A linear model is ``L = 1``, one
    hidden layer is ``L = 2``.
    """
    widths = [int(w) for w in widths]
    if not widths or any(w <= 0 for w in widths):
        raise ValueError("widths must be a non-empty sequence of positive integers")
    L = len(widths)
    pi = math.sqrt(math.prod(widths[2:])) if L >= 3 else 1.0
    return float(kappa ** (L - 1) * pi * lambda_qut)

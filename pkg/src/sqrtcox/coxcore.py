"""Cox partial likelihood, its square root, and Breslow baseline estimation.

All risk-set sums use one descending-time sort: the risk set of subject
``i`` (``y_j >= y_i``, ties included) is a prefix of that order, so sums
over it are prefix accumulations evaluated at the end of ``i``'s tie block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Standardization, SurvivalDataset, apply_standardization
from .errors import DataError, DegenerateLikelihoodError, NumericalError


@dataclass(frozen=True)
class RiskSetIndex:
    """Sorting information shared by every likelihood evaluation on a dataset.

    Attributes
    ----------
    ordering : permutation sorting the times in descending order.
    risk_counts : ``N_i = #{j : y_j >= y_i}`` in the original subject order.
    event_rows : indices of uncensored subjects.
    """

    ordering: np.ndarray
    risk_counts: np.ndarray
    event_rows: np.ndarray
    # positions (in descending order) of the last / first member of each tie block
    block_last: np.ndarray = field(repr=False)
    block_first: np.ndarray = field(repr=False)
    sorted_times: np.ndarray = field(repr=False)
    sorted_events: np.ndarray = field(repr=False)


def build_risk_index(d: SurvivalDataset) -> RiskSetIndex:
    order = np.argsort(-d.times, kind="stable")
    t = d.times[order]
    # t is non-increasing; flip sign to get an ascending key for searchsorted
    key = -t
    last = np.searchsorted(key, key, side="right") - 1
    first = np.searchsorted(key, key, side="left")
    counts = np.empty(d.n, dtype=np.int64)
    counts[order] = last + 1
    return RiskSetIndex(
        ordering=order,
        risk_counts=counts,
        event_rows=np.flatnonzero(d.events == 1),
        block_last=last,
        block_first=first,
        sorted_times=t,
        sorted_events=d.events[order].astype(float),
    )


def _check_mu(mu, n):
    mu = np.asarray(mu, dtype=float).reshape(-1)
    if mu.shape[0] != n:
        raise DataError(f"mu has length {mu.shape[0]}, expected {n}")
    if not np.all(np.isfinite(mu)):
        raise NumericalError("non-finite log-risk values")
    return mu


def _log_risk_sums(idx: RiskSetIndex, mu_sorted: np.ndarray) -> np.ndarray:
    """``log sum_{j: y_j >= y_i} exp(mu_j)`` per sorted position."""
    return np.logaddexp.accumulate(mu_sorted)[idx.block_last]


def log_partial_likelihood(d: SurvivalDataset, idx: RiskSetIndex, mu) -> float:
    """Breslow-convention log partial likelihood of the log-risks ``mu``."""
    mu = _check_mu(mu, d.n)
    ms = mu[idx.ordering]
    c = idx.sorted_events
    if not c.any():
        return 0.0
    log_r = _log_risk_sums(idx, ms)
    return float(np.sum(c * (ms - log_r)))


def _value_and_gradient(idx: RiskSetIndex, mu: np.ndarray) -> tuple[float, np.ndarray]:
    ms = mu[idx.ordering]
    c = idx.sorted_events
    log_r = _log_risk_sums(idx, ms)
    value = float(np.sum(c * (ms - log_r)))
    # subject k receives exp(mu_k) * sum_{i: y_i <= y_k} c_i / R_i; that set
    # is the suffix starting at the first member of k's tie block
    with np.errstate(divide="ignore"):
        w = np.where(c > 0, -log_r, -np.inf)
    log_acc = np.logaddexp.accumulate(w[::-1])[::-1][idx.block_first]
    g_sorted = c - np.exp(ms + log_acc)
    grad = np.empty_like(mu)
    grad[idx.ordering] = g_sorted
    return value, grad


def gradient_wrt_mu(d: SurvivalDataset, idx: RiskSetIndex, mu) -> np.ndarray:
    """Gradient of :func:`log_partial_likelihood` with respect to ``mu``."""
    mu = _check_mu(mu, d.n)
    if not np.any(d.events):
        return np.zeros(d.n)
    return _value_and_gradient(idx, mu)[1]


def neg_loss_and_gradient(idx: RiskSetIndex, mu: np.ndarray) -> tuple[float, np.ndarray]:
    """``sqrt(-l)`` and its gradient in ``mu``, unchecked (solver inner loop)."""
    ll, g = _value_and_gradient(idx, mu)
    nl = -ll
    if not nl > 0:
        raise DegenerateLikelihoodError(
            "degenerate likelihood; square-root loss undefined at this point"
        )
    root = np.sqrt(nl)
    return root, g / (-2.0 * root)


def sqrt_neg_loss(d: SurvivalDataset, idx: RiskSetIndex, mu) -> float:
    mu = _check_mu(mu, d.n)
    nl = -log_partial_likelihood(d, idx, mu)
    if not nl > 0:
        raise DegenerateLikelihoodError(
            "degenerate likelihood; square-root loss undefined at this point"
        )
    return float(np.sqrt(nl))


def sqrt_neg_loss_gradient(d: SurvivalDataset, idx: RiskSetIndex, mu) -> np.ndarray:
    """Gradient ``-grad(l) / (2 sqrt(-l))`` of the square-root loss in ``mu``."""
    mu = _check_mu(mu, d.n)
    if not np.any(d.events):
        raise DegenerateLikelihoodError(
            "degenerate likelihood; square-root loss undefined at this point"
        )
    return neg_loss_and_gradient(idx, mu)[1]


@dataclass(frozen=True)
class BaselineHazard:
    """Right-continuous step function ``H0`` jumping at the distinct event times."""

    event_times: np.ndarray
    cumulative: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "event_times", np.asarray(self.event_times, dtype=float))
        object.__setattr__(self, "cumulative", np.asarray(self.cumulative, dtype=float))

    def cumulative_hazard(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.event_times, t, side="right")
        padded = np.concatenate([[0.0], self.cumulative])
        return padded[k]

    def survival(self, t) -> np.ndarray:
        return np.maximum(np.exp(-self.cumulative_hazard(t)), np.finfo(float).tiny)

    def to_dict(self) -> dict:
        return {"event_times": self.event_times.tolist(), "cumulative": self.cumulative.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineHazard":
        return cls(d["event_times"], d["cumulative"])


def breslow(d: SurvivalDataset, idx: RiskSetIndex, mu_hat) -> BaselineHazard:
    """Breslow estimator of the cumulative baseline hazard.

    At ``mu_hat = 0`` this is the Nelson-Aalen estimator ``sum c_i / N_i``.
    """
    mu = _check_mu(mu_hat, d.n)
    if not np.any(d.events):
        raise DataError("no observed events")
    ms = mu[idx.ordering]
    shift = ms.max()
    risk = np.cumsum(np.exp(ms - shift))[idx.block_last]
    c = idx.sorted_events
    # ascending time order from here on
    inc = (c * np.exp(-shift) / risk)[::-1]
    t_asc = idx.sorted_times[::-1]
    c_asc = c[::-1]
    cum = np.cumsum(inc)
    # last position of each distinct time among events
    change = t_asc[1:] != t_asc[:-1]
    is_last = np.append(change, True)
    block_id = np.cumsum(np.append(True, change)) - 1
    has_event = (np.bincount(block_id, weights=c_asc) > 0)[block_id]
    keep = is_last & has_event
    return BaselineHazard(t_asc[keep], cum[keep])


@dataclass
class LinearCoxModel:
    """Coefficients on the standardized scale plus what prediction needs."""

    theta: np.ndarray
    standardization: Standardization
    baseline: BaselineHazard | None = None
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)

    @property
    def support(self) -> set[int]:
        return {int(j) for j in np.flatnonzero(self.theta != 0)}

    def log_risk(self, X_raw) -> np.ndarray:
        """``mu(x) = x^T theta`` for raw-scale covariate rows."""
        Z = apply_standardization(np.atleast_2d(X_raw), self.standardization)
        return Z @ self.theta

    def to_dict(self) -> dict:
        return {
            "kind": "linear",
            "theta": self.theta.tolist(),
            "support": sorted(self.support),
            "feature_names": list(self.feature_names),
            "standardization": self.standardization.to_dict(),
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LinearCoxModel":
        base = d.get("baseline")
        return cls(
            np.array(d["theta"], dtype=float),
            Standardization.from_dict(d["standardization"]),
            None if base is None else BaselineHazard.from_dict(base),
            tuple(d.get("feature_names", ())),
        )


def predict_survival(model, x_new, t_grid) -> np.ndarray:
    """``S(t | x) = S0(t) ** exp(mu(x))`` on ``t_grid``.

    ``x_new`` is on the raw scale; a single vector gives a 1-d result, a
    matrix one row per subject. Works for any model exposing ``log_risk``
    and ``baseline``.
    """
    if model.baseline is None:
        raise DataError("model has no baseline hazard; fit it first")
    x = np.asarray(x_new, dtype=float)
    single = x.ndim == 1
    mu = np.atleast_1d(model.log_risk(np.atleast_2d(x)))
    h0 = model.baseline.cumulative_hazard(np.asarray(t_grid, dtype=float))
    surv = np.exp(-np.outer(np.exp(mu), h0))
    # keep probabilities strictly positive when exp underflows
    surv = np.maximum(surv, np.finfo(float).tiny)
    return surv[0] if single else surv

"""Annealed proximal-gradient solver for the penalized square-root Cox problem.

The penalty level climbs a ladder ``lam_i = e**(i-1) / (1 + e**(i-1)) * lam_qut``
(``i = 0..5``, then ``lam_qut`` itself) while ``nu`` moves from 1 towards
0.1. Every rung is warm-started from the previous one; intermediate rungs
use proximal gradient with backtracking, the last one FISTA. The selected
support is then refit without penalty.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from .coxcore import (
    LinearCoxModel,
    breslow,
    build_risk_index,
    neg_loss_and_gradient,
)
from .data import Standardization, SurvivalDataset
from .errors import DegenerateLikelihoodError, NumericalError
from .penalty import PenaltySpec, prox as penalty_prox, rho

NU_PATH_HARDER = (1.0, 0.9, 0.7, 0.4, 0.3, 0.2, 0.1)
MODES = ("harder", "lasso")
# For nu < 1 the prox of step * lam * rho_nu zeroes |z| <= step * lam only
# while step * lam stays small (about 2e-8 relative deficit at 0.1 for
# nu = 0.1); larger steps let iterates leave the origin even when the
# origin is a local minimum.
MAX_PROX_WEIGHT = 0.1
LINE_SEARCH_HALVINGS = 50

SmoothFn = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass(frozen=True)
class PathSchedule:
    """Sequence of ``(lam, nu)`` rungs ending at ``(lam_qut, nu_final)``."""

    steps: tuple[tuple[float, float], ...]
    mode: str = "harder"
    max_iters: int = 5000
    max_iters_intermediate: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        lams = [s[0] for s in self.steps]
        if not lams or any(b <= a for a, b in zip(lams, lams[1:])):
            raise ValueError("penalty levels must be strictly increasing along the path")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def lambda_final(self) -> float:
        return self.steps[-1][0]

    def penalty(self, k: int) -> PenaltySpec:
        """Penalty used on rung ``k``.

        ``rho_1`` is ``|t| / 2`` while every ``rho_nu`` with ``nu < 1`` has
        unit slope at the origin, as does the l1 norm the thresholding
        analysis uses. Rungs with ``nu = 1`` therefore solve with
        ``lam * ||theta||_1`` (level doubled).
        """
        lam, nu = self.steps[k]
        if self.mode == "lasso" or nu >= 1.0:
            return PenaltySpec(2.0 * lam, 1.0)
        return PenaltySpec(lam, nu)


def ladder_fractions() -> list[float]:
    out = [math.exp(i - 1) / (1 + math.exp(i - 1)) for i in range(6)]
    return out + [1.0]


def build_schedule(lambda_qut: float, mode: str = "harder", *, max_iters: int = 5000,
                   max_iters_intermediate: int = 500, tol: float = 1e-8) -> PathSchedule:
    if not lambda_qut > 0:
        raise ValueError("lambda_qut must be positive")
    fracs = ladder_fractions()
    lams = [f * lambda_qut for f in fracs[:-1]] + [float(lambda_qut)]
    nus = NU_PATH_HARDER if mode == "harder" else (1.0,) * len(lams)
    return PathSchedule(tuple(zip(lams, nus)), mode, max_iters, max_iters_intermediate, tol)


def single_step_schedule(lam: float, nu: float = 0.1, mode: str = "harder", **kw) -> PathSchedule:
    """A one-rung path: solve directly at ``(lam, nu)``."""
    return PathSchedule(((float(lam), nu),), mode, **kw)


@dataclass
class PhaseLog:
    lam: float
    nu: float
    algorithm: str
    iterations: int = 0
    converged: bool = False
    aborted: bool = False
    start_objective: float = float("nan")
    end_objective: float = float("nan")
    trace: list = field(default_factory=list)


@dataclass
class FitReport:
    mode: str
    phases: list = field(default_factory=list)
    support: list = field(default_factory=list)
    refit: bool = False
    refit_converged: bool = True
    refit_iterations: int = 0
    refit_grad_norm: float = 0.0
    seconds: float = 0.0

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.phases) and self.refit_converged

    def to_dict(self, include_traces: bool = True) -> dict:
        d = asdict(self)
        if not include_traces:
            for p in d["phases"]:
                p.pop("trace")
        d["converged"] = self.converged
        return d


def _safe(fun: SmoothFn, x):
    try:
        f, g = fun(x)
    except DegenerateLikelihoodError:
        return math.inf, None
    if not math.isfinite(f):
        return math.inf, None
    return f, g


def _small_change(F, F_new, x, x_new, tol):
    # the step test matters for exact zeros: a coefficient shrinking towards
    # the origin changes the objective by O(step**2) per iteration
    if abs(F - F_new) > tol * max(abs(F), 1e-300):
        return False
    if x.size == 0:
        return True
    return float(np.max(np.abs(x_new - x))) <= tol * max(1.0, float(np.max(np.abs(x_new))))


def _prox_step(fun, prox, penalty, y, fy, gy, t, log):
    """Backtracking from ``y``; returns (x_new, f_new, g_new, t) or None."""
    for _ in range(LINE_SEARCH_HALVINGS):
        xn = prox(y - t * gy, t)
        fn, gn = _safe(fun, xn)
        d = xn - y
        if fn <= fy + gy @ d + (d @ d) / (2.0 * t) + 1e-12 * abs(fy):
            return xn, fn, gn, t
        t *= 0.5
    log.aborted = True
    return None


def proximal_phase(fun: SmoothFn, prox, start, *, penalty=lambda x: 0.0, max_iters=500,
                   tol=1e-8, step=1.0, max_step=math.inf, log: PhaseLog | None = None):
    """Proximal gradient (ISTA) with backtracking.

    ``fun(x)`` returns the smooth value and gradient, ``prox(z, t)`` the
    proximal map of ``t`` times the penalty and ``penalty(x)`` its value.
    Stops once both the relative objective change and the largest
    coordinate move (relative to ``max(1, |x|_inf)``) are below ``tol``.
    """
    log = log if log is not None else PhaseLog(math.nan, math.nan, "ista")
    x = np.array(start, dtype=float)
    fx, gx = _safe(fun, x)
    if gx is None:
        raise DegenerateLikelihoodError("objective undefined at the starting point")
    F = fx + penalty(x)
    log.start_objective = F
    log.trace.append(F)
    t = min(step, max_step)
    for it in range(1, max_iters + 1):
        res = _prox_step(fun, prox, penalty, x, fx, gx, t, log)
        if res is None:
            break
        x_new, fx, gx, t = res
        F_new = fx + penalty(x_new)
        log.trace.append(F_new)
        log.iterations = it
        done = _small_change(F, F_new, x, x_new, tol)
        x, F = x_new, F_new
        if done:
            log.converged = True
            break
    log.end_objective = F
    return x


def fista_phase(fun: SmoothFn, prox, start, *, penalty=lambda x: 0.0, max_iters=5000,
                tol=1e-8, step=1.0, max_step=math.inf, restart=True,
                log: PhaseLog | None = None):
    """FISTA with backtracking; with ``restart`` the momentum is dropped
    whenever the objective would increase, which keeps the trace monotone."""
    log = log if log is not None else PhaseLog(math.nan, math.nan, "fista")
    x = np.array(start, dtype=float)
    fx, gx = _safe(fun, x)
    if gx is None:
        raise DegenerateLikelihoodError("objective undefined at the starting point")
    F = fx + penalty(x)
    log.start_objective = F
    log.trace.append(F)
    y, fy, gy = x, fx, gx
    tk = 1.0
    t = min(step, max_step)
    it = 0
    while it < max_iters:
        res = _prox_step(fun, prox, penalty, y, fy, gy, t, log)
        if res is None:
            break
        x_new, fn, gn, t = res
        F_new = fn + penalty(x_new)
        if restart and F_new > F and tk > 1.0:
            y, fy, gy, tk = x, fx, gx, 1.0
            continue
        it += 1
        log.trace.append(F_new)
        done = _small_change(F, F_new, x, x_new, tol)
        tk_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        y = x_new + ((tk - 1.0) / tk_new) * (x_new - x)
        x, fx, gx, F, tk = x_new, fn, gn, F_new, tk_new
        if done:
            log.converged = True
            break
        fy, gy = _safe(fun, y)
        if gy is None:
            y, fy, gy, tk = x, fx, gx, 1.0
    log.iterations = it
    log.end_objective = F
    return x


def run_path(fun: SmoothFn, n_params: int, penalized: np.ndarray | slice, schedule: PathSchedule,
             start, report: FitReport) -> np.ndarray:
    """Solve every rung of ``schedule`` with warm starts; the prox acts on
    the ``penalized`` entries only."""
    x = np.array(start, dtype=float)
    for k in range(len(schedule.steps)):
        spec = schedule.penalty(k)
        final = k == len(schedule.steps) - 1

        def prox(z, t, spec=spec):
            out = z.copy()
            out[penalized] = penalty_prox(spec, z[penalized], t)
            return out

        def penalty(v, spec=spec):
            return spec.lam * float(np.sum(rho(spec, v[penalized])))

        max_step = MAX_PROX_WEIGHT / spec.lam if spec.nu < 1 and spec.lam > 0 else math.inf
        lam, nu = schedule.steps[k]
        log = PhaseLog(lam, nu, "fista" if final else "ista")
        if final:
            x = fista_phase(fun, prox, x, penalty=penalty, max_iters=schedule.max_iters,
                            tol=schedule.tol, max_step=max_step, log=log)
        else:
            x = proximal_phase(fun, prox, x, penalty=penalty,
                               max_iters=schedule.max_iters_intermediate,
                               tol=schedule.tol, max_step=max_step, log=log)
        report.phases.append(log)
    return x


def unpenalized_refit(fun: SmoothFn, start, *, gtol=1e-9, max_iters=5000):
    """Minimize the smooth objective alone (L-BFGS), from ``start``.

    Returns ``(x, converged, iterations, sup-norm of the final gradient)``.
    """
    def wrapped(v):
        try:
            f, g = fun(v)
        except DegenerateLikelihoodError:
            return math.inf, np.zeros_like(v)
        return f, g

    res = optimize.minimize(wrapped, np.asarray(start, dtype=float), jac=True, method="L-BFGS-B",
                            options={"maxiter": max_iters, "gtol": gtol, "ftol": 1e-15,
                                     "maxcor": 20})
    x = res.x
    f, g = wrapped(x)
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    if not math.isfinite(f):
        raise NumericalError("refit diverged: square-root loss became degenerate")
    return x, gnorm < 1e-6, int(res.nit), gnorm


def linear_objective(d: SurvivalDataset, idx=None) -> SmoothFn:
    """``theta -> (sqrt(-l(X theta)), X^T dmu)`` for a standardized dataset."""
    idx = build_risk_index(d) if idx is None else idx
    X = d.covariates

    def fun(theta):
        f, g = neg_loss_and_gradient(idx, X @ theta)
        return f, X.T @ g

    return fun


def fit_linear(d: SurvivalDataset, schedule: PathSchedule, init=None,
               standardization: Standardization | None = None,
               refit: bool = True) -> tuple[LinearCoxModel, FitReport]:
    """Fit the sparse linear model on standardized data ``d``.

    The returned coefficients carry exact zeros off the support; the
    baseline hazard is the Breslow estimate at the refit coefficients.
    """
    started = time.perf_counter()
    if not np.any(d.events):
        raise DegenerateLikelihoodError("no observed events")
    idx = build_risk_index(d)
    fun = linear_objective(d, idx)
    p = d.p
    theta0 = np.zeros(p) if init is None else np.asarray(init, dtype=float)
    report = FitReport(schedule.mode)
    theta = run_path(fun, p, slice(None), schedule, theta0, report)
    support = np.flatnonzero(theta != 0)
    if refit and support.size:
        Xs = d.covariates[:, support]

        def sub(v):
            f, g = neg_loss_and_gradient(idx, Xs @ v)
            return f, Xs.T @ g

        v, ok, nit, gnorm = unpenalized_refit(sub, theta[support])
        theta = np.zeros(p)
        theta[support] = v
        report.refit = True
        report.refit_converged = ok
        report.refit_iterations = nit
        report.refit_grad_norm = gnorm
    report.support = support.tolist()
    s = standardization or Standardization.identity(p)
    model = LinearCoxModel(theta, s, breslow(d, idx, d.covariates @ theta), d.feature_names)
    report.seconds = time.perf_counter() - started
    return model, report

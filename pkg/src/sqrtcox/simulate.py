"""Synthetic survival data under an exponential Cox model, and the
support-recovery benchmark built on it."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import SurvivalDataset
from .errors import SqrtCoxError

DESIGNS = ("linear", "abs_pairs")
METHODS = {"harder_qut": "harder", "lasso_qut": "lasso"}
# a grid row whose failed-replicate share exceeds this is flagged
FAILURE_FLAG = 0.2


@dataclass(frozen=True)
class SimConfig:
    n: int = 150
    p: int = 100
    s: int = 0
    design: str = "linear"
    h0: float = 1.0
    target_censoring: float = 0.5
    coef_pool: tuple = (-3.0, -2.0, -1.0, 1.0, 2.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not 0 <= self.s <= self.p:
            raise ValueError(f"sparsity s={self.s} must lie in [0, p={self.p}]")
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}")
        if self.design == "abs_pairs" and self.s % 2:
            raise ValueError("abs_pairs design needs an even s")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if not 0 <= self.target_censoring < 1:
            raise ValueError("target_censoring must lie in [0, 1)")


@dataclass
class Truth:
    support: tuple[int, ...]
    coefficients: np.ndarray
    design: str
    log_risk: np.ndarray
    latent_times: np.ndarray
    cutoff: float

    def mu(self, X) -> np.ndarray:
        """True log-risk for rows of ``X``."""
        X = np.asarray(X, dtype=float)
        Xs = X[:, list(self.support)]
        if self.design == "linear":
            return Xs @ self.coefficients if self.support else np.zeros(X.shape[0])
        out = np.zeros(X.shape[0])
        for i in range(0, len(self.support), 2):
            out += 10.0 * np.abs(Xs[:, i + 1] - Xs[:, i])
        return out


def _censor(T: np.ndarray, target: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Administrative cutoff at the order statistic keeping ``ceil((1-target) n)`` events."""
    n = T.shape[0]
    k = max(1, math.ceil((1.0 - target) * n - 1e-9))
    cutoff = float(np.sort(T)[k - 1])
    events = (T <= cutoff).astype(np.int8)
    return np.minimum(T, cutoff), events, cutoff


def draw_outcomes(mu, h0: float, target: float, rng: np.random.Generator):
    T = rng.exponential(1.0, size=mu.shape[0]) / (h0 * np.exp(mu))
    y, c, cutoff = _censor(T, target)
    return T, y, c, cutoff


def generate(cfg: SimConfig) -> tuple[SurvivalDataset, Truth]:
    """Gaussian design, random true support, exponential survival times.

    The rate of subject ``i`` is ``h0 * exp(mu_i)``; the censoring fraction
    is within ``1/n`` of ``cfg.target_censoring``.
    """
    rng = np.random.default_rng(cfg.seed)
    X = rng.standard_normal((cfg.n, cfg.p))
    support = tuple(int(j) for j in rng.choice(cfg.p, size=cfg.s, replace=False))
    if cfg.design == "linear":
        beta = rng.choice(np.asarray(cfg.coef_pool, dtype=float), size=cfg.s)
    else:
        beta = np.full(cfg.s // 2, 10.0)
    truth = Truth(support, beta, cfg.design, np.zeros(cfg.n), np.zeros(cfg.n), 0.0)
    mu = truth.mu(X)
    T, y, c, cutoff = draw_outcomes(mu, cfg.h0, cfg.target_censoring, rng)
    truth.log_risk, truth.latent_times, truth.cutoff = mu, T, cutoff
    return SurvivalDataset(y, c, X), truth


def generate_test(cfg: SimConfig, truth: Truth, seed) -> SurvivalDataset:
    """Independent sample of the same size from the same true model."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((cfg.n, cfg.p))
    _, y, c, _ = draw_outcomes(truth.mu(X), cfg.h0, cfg.target_censoring, rng)
    return SurvivalDataset(y, c, X)


# ---------------------------------------------------------------- benchmark

TIDY_COLUMNS = ("s", "replicate", "exact", "tpr", "fdr", "cindex", "fit_seconds",
                "n_selected", "lambda", "converged", "error")
AGG_COLUMNS = ("s", "replicates", "failed", "flagged", "pesr", "tpr", "fdr", "cindex")


def replicate_seeds(seed: int, s: int, r: int) -> tuple[int, int, int, int]:
    """(data, qut, init, test) seeds of replicate ``r`` at sparsity ``s``.

    Derived from ``(seed, s, r)`` alone, so results do not depend on how
    replicates are scheduled across workers.
    """
    state = np.random.SeedSequence([int(seed), int(s), int(r)]).generate_state(4)
    return tuple(int(v) for v in state)


@dataclass(frozen=True)
class BenchmarkTask:
    cfg: SimConfig
    r: int
    method: str
    model: str
    hidden: tuple
    alpha: float
    qut_replicates: int


def run_replicate(task: BenchmarkTask) -> dict:
    """generate -> standardize -> QUT -> fit -> support metrics + held-out C-index."""
    from .metrics import concordance_index, support_metrics
    from .pipeline import FitConfig, fit_pipeline

    cfg = task.cfg
    data_seed, qut_seed, init_seed, test_seed = replicate_seeds(cfg.seed, cfg.s, task.r)
    row = {"s": cfg.s, "replicate": task.r}
    try:
        d, truth = generate(replace(cfg, seed=data_seed))
        fc = FitConfig(mode=METHODS[task.method], model=task.model, hidden=task.hidden,
                       alpha=task.alpha, qut_replicates=task.qut_replicates, seed=qut_seed)
        # the network init seed is separate from the QUT seed
        if task.model == "network":
            from .ann import fit_network
            from .data import standardize
            from .optimizer import build_schedule
            from .pipeline import penalty_level

            started = time.perf_counter()
            ds, std = standardize(d)
            lam, _ = penalty_level(ds, fc)
            model, report = fit_network(ds, build_schedule(lam, fc.mode), fc.hidden,
                                        fc.activation, init_seed, standardization=std)
            seconds = time.perf_counter() - started
        else:
            started = time.perf_counter()
            res = fit_pipeline(d, fc)
            model, report, lam = res.model, res.report, res.lambda_used
            seconds = time.perf_counter() - started
        sm = support_metrics(model.support, truth.support)
        test = generate_test(cfg, truth, test_seed)
        cidx = concordance_index(test.times, test.events, model.log_risk(test.covariates))
        row.update(exact=int(sm.exact), tpr=sm.tpr, fdr=sm.fdr, cindex=cidx,
                   fit_seconds=seconds, n_selected=len(model.support), **{"lambda": lam},
                   converged=int(report.converged), error="")
    except (SqrtCoxError, np.linalg.LinAlgError) as exc:
        row.update(exact="", tpr="", fdr="", cindex="", fit_seconds="", n_selected="",
                   **{"lambda": ""}, converged="", error=f"{type(exc).__name__}: {exc}")
    return row


def aggregate(rows: Sequence[dict], grid: Sequence[int], replicates: int) -> list[dict]:
    """Per-s means over successful replicates; failures counted and flagged."""
    out = []
    for s in grid:
        mine = [r for r in rows if r["s"] == s]
        ok = [r for r in mine if not r["error"]]
        failed = len(mine) - len(ok)

        def mean(key):
            return float(np.mean([r[key] for r in ok])) if ok else float("nan")

        out.append({
            "s": s, "replicates": len(ok), "failed": failed,
            "flagged": int(failed > FAILURE_FLAG * replicates),
            "pesr": mean("exact"), "tpr": mean("tpr"), "fdr": mean("fdr"),
            "cindex": mean("cindex"),
        })
    return out


@dataclass
class BenchmarkReport:
    grid: tuple
    replicates: int
    method: str
    model: str
    seed: int
    config: dict
    rows: list
    aggregates: list = field(default_factory=list)

    def row_for(self, s: int) -> dict:
        for a in self.aggregates:
            if a["s"] == s:
                return a
        raise KeyError(s)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "config": self.config, "aggregates": self.aggregates,
                "rows": self.rows}

    def _write(self, path, columns, rows, header: dict | None):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            if header is not None:
                fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
            w = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
            w.writeheader()
            for row in rows:
                w.writerow({k: _fmt(row[k]) for k in columns})

    def write_tidy_csv(self, path, header: dict | None = None):
        """One line per (s, replicate)."""
        self._write(path, TIDY_COLUMNS, self.rows, header)

    def write_aggregate_csv(self, path, header: dict | None = None):
        """One line per sparsity level."""
        self._write(path, AGG_COLUMNS, self.aggregates, header)


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def run_benchmark(grid: Sequence[int], cfg: SimConfig = SimConfig(), replicates: int = 50,
                  method: str = "harder_qut", model: str = "linear", *,
                  hidden: Sequence[int] = (20,), alpha: float = 0.05,
                  qut_replicates: int = 1000, threads: int = 1) -> BenchmarkReport:
    """Replicated support-recovery study over the sparsity levels in ``grid``.

    ``cfg`` is the template (its ``s`` is replaced by each grid value and
    its ``seed`` is the master seed). Fit errors are recorded per replicate
    rather than raised.
    """
    grid = tuple(int(s) for s in grid)
    if not grid:
        raise ValueError("empty sparsity grid")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {tuple(METHODS)}")
    if model not in ("linear", "network"):
        raise ValueError(f"unknown model {model!r}")
    if replicates < 1 or threads < 1:
        raise ValueError("replicates and threads must be >= 1")
    tasks = [BenchmarkTask(replace(cfg, s=s), r, method, model, tuple(hidden), alpha,
                           qut_replicates)
             for s in grid for r in range(replicates)]
    if threads == 1:
        rows = [run_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run_replicate, tasks, chunksize=1))
    rows.sort(key=lambda r: (grid.index(r["s"]), r["replicate"]))
    config = {"grid": list(grid), "template": {**asdict(cfg), "coef_pool": list(cfg.coef_pool)},
              "replicates": replicates, "method": method, "model": model,
              "hidden": list(hidden), "alpha": alpha, "qut_replicates": qut_replicates}
    return BenchmarkReport(grid, replicates, method, model, cfg.seed, config, rows,
                           aggregate(rows, grid, replicates))

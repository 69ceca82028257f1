"""The twelve acceptance criteria, at their stated sizes and tolerances.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting. Criteria 1, 8 and 9 are Monte-Carlo studies and take minutes.
"""

import itertools
import math

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE, random_dataset
from sqrtcox import (
    PenaltySpec,
    QutConfig,
    SimConfig,
    build_risk_index,
    build_schedule,
    fit_linear,
    generate,
    lambda0,
    prox,
    qut_bootstrap,
    qut_gaussian,
    rescale_for_network,
    run_benchmark,
    standardize,
    support_metrics,
)
from sqrtcox.ann import init_network, network_objective
from sqrtcox.coxcore import breslow, gradient_wrt_mu, log_partial_likelihood, sqrt_neg_loss
from sqrtcox.coxcore import sqrt_neg_loss_gradient
from sqrtcox.metrics import concordance_counts
from sqrtcox.optimizer import linear_objective, single_step_schedule


def record(k, title, ok, detail):
    ACCEPTANCE[k] = (title, bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] {k}. {title}: {detail}")
    return ok


@pytest.mark.slow
def test_01_qut_null_calibration():
    R, empty = 200, 0
    for r in range(R):
        d, _ = generate(SimConfig(n=150, p=100, s=0, seed=1_000 + r))
        ds, _ = standardize(d)
        lam = qut_gaussian(ds.covariates, QutConfig(alpha=0.05, seed=r)).lambda_qut
        model, _ = fit_linear(ds, build_schedule(lam, "harder"))
        empty += not model.support
    frac = empty / R
    assert record(1, "QUT null calibration", 0.90 <= frac <= 0.99,
                  f"empty-support fraction {frac:.3f} over R={R} (target [0.90, 0.99])")


def test_02_zero_thresholding():
    rng = np.random.default_rng(2)
    hits = {"harder": 0, "lasso": 0, "lasso_path": 0}
    for _ in range(100):
        n, p = int(rng.integers(20, 201)), int(rng.integers(1, 51))
        d = random_dataset(rng, n, p, censor=rng.uniform(0, 0.7), signal=rng.uniform(0, 1))
        ds, _ = standardize(d)
        lam = lambda0(ds) * (1 + 1e-6)
        for key, sched in (("harder", single_step_schedule(lam, 0.1, "harder")),
                           ("lasso", single_step_schedule(lam, 1.0, "lasso")),
                           ("lasso_path", build_schedule(lam, "lasso"))):
            theta = fit_linear(ds, sched, refit=False)[0].theta
            hits[key] += bool(np.all(theta == 0))
    ok = all(v == 100 for v in hits.values())
    assert record(2, "zero-thresholding at lambda0(1+1e-6)", ok,
                  f"exact zeros: harder {hits['harder']}/100, lasso {hits['lasso']}/100, "
                  f"lasso annealed path {hits['lasso_path']}/100")


def test_03_lambda0_oracle():
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(100):
        n, p = int(rng.integers(2, 80)), int(rng.integers(1, 8))
        d = random_dataset(rng, n, p, censor=0.3, ties=k % 2 == 0)
        while not np.any(d.events * (oracles.risk_counts(d.times) > 1)):
            d = random_dataset(rng, n, p, censor=0.3, ties=k % 2 == 0)
        ref = oracles.lambda0(d.times, d.events, d.covariates)
        worst = max(worst, abs(lambda0(d) - ref) / ref)
    assert record(3, "lambda0 vs O(n^2) oracle", worst < 1e-10,
                  f"max relative error {worst:.2e} over 100 instances (tol 1e-10)")


def test_04_gradients():
    rng = np.random.default_rng(4)
    worst = {"loglik": 0.0, "sqrt": 0.0, "linear": 0.0, "network": 0.0}
    for k in range(50):
        n, p = int(rng.integers(5, 40)), int(rng.integers(1, 6))
        d = random_dataset(rng, n, p, censor=0.3, ties=k % 3 == 0)
        idx = build_risk_index(d)
        mu = rng.standard_normal(n)
        fd = oracles.central_diff(lambda m: log_partial_likelihood(d, idx, m), mu)
        worst["loglik"] = max(worst["loglik"],
                              oracles.rel_err(fd, gradient_wrt_mu(d, idx, mu)))
        fd = oracles.central_diff(lambda m: sqrt_neg_loss(d, idx, m), mu)
        worst["sqrt"] = max(worst["sqrt"],
                            oracles.rel_err(fd, sqrt_neg_loss_gradient(d, idx, mu)))
        f = linear_objective(d, idx)
        theta = 0.5 * rng.standard_normal(p)
        worst["linear"] = max(worst["linear"], oracles.rel_err(
            oracles.central_diff(lambda v: f(v)[0], theta), f(theta)[1]))
        hidden = (int(rng.integers(2, 7)),) if k % 2 else (4, 3)
        net = init_network(p, hidden, "tanh" if k % 4 < 2 else "relu", seed=k)
        g = network_objective(net, d, idx)
        x = net.flatten()
        worst["network"] = max(worst["network"], oracles.rel_err(
            oracles.central_diff(lambda v: g(v)[0], x), g(x)[1]))
    ok = all(v < 1e-5 for v in worst.values())
    assert record(4, "analytic gradients vs central differences", ok,
                  ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol 1e-5)")


def test_05_prox_oracle():
    zs, weights = (0.1, 0.5, 1.0, 3.0), (0.1, 0.5, 1.0, 2.0)
    worst_grid, worst_soft = 0.0, 0.0
    for nu in (1.0, 0.7, 0.3, 0.1):
        for z, w in itertools.product(zs, weights):
            got = float(prox(PenaltySpec(w, nu), z, 1.0))
            worst_grid = max(worst_grid, abs(got - oracles.grid_prox(z, w, nu)))
            if nu == 1.0:
                soft = math.copysign(max(abs(z) - w / 2, 0.0), z)
                worst_soft = max(worst_soft, abs(got - soft))
    ok = worst_grid <= 1e-4 and worst_soft <= 1e-12
    assert record(5, "prox vs grid search / soft threshold", ok,
                  f"grid max error {worst_grid:.1e} (tol 1e-4), "
                  f"soft-threshold max error {worst_soft:.1e} (tol 1e-12)")


def test_06_breslow_oracle():
    rng = np.random.default_rng(6)
    exact = 0
    for k in range(50):
        d = random_dataset(rng, int(rng.integers(2, 120)), 1, censor=0.5, ties=k % 2 == 0)
        base = breslow(d, build_risk_index(d), np.zeros(d.n))
        times, H = oracles.nelson_aalen(d.times, d.events)
        exact += bool(np.array_equal(base.event_times, times) and np.array_equal(base.cumulative, H))
    assert record(6, "Breslow at theta=0 equals Nelson-Aalen", exact == 50,
                  f"bitwise equal on {exact}/50 datasets")


def test_07_gaussian_vs_bootstrap():
    d, _ = generate(SimConfig(n=150, p=100, s=0, seed=7))
    ds, _ = standardize(d)
    g = qut_gaussian(ds.covariates, QutConfig(replicates=1000, seed=7)).lambda_qut
    b = qut_bootstrap(ds, QutConfig(replicates=1000, method="bootstrap", seed=7)).lambda_qut
    rel = abs(g - b) / g
    assert record(7, "Gaussian vs bootstrap QUT", rel <= 0.15,
                  f"gaussian {g:.4f}, bootstrap {b:.4f}, relative gap {rel:.3f} (tol 0.15)")


def _monotone_with_one_inversion(values, slack=0.1):
    rises = [b - a for a, b in zip(values, values[1:]) if b > a]
    return len(rises) == 0 or (len(rises) == 1 and rises[0] <= slack)


@pytest.mark.slow
def test_08_phase_transition():
    grid = (0, 1, 2, 4, 8, 16)
    rep = run_benchmark(grid, SimConfig(n=150, p=100, seed=8), replicates=50,
                        method="harder_qut")
    pesr = [rep.row_for(s)["pesr"] for s in grid]
    fdr = [rep.row_for(s)["fdr"] for s in grid]
    failed = sum(rep.row_for(s)["failed"] for s in grid)
    ok = (all(rep.row_for(s)["pesr"] >= 0.8 for s in grid if s <= 2)
          and _monotone_with_one_inversion(pesr) and max(fdr) <= 0.15 and failed == 0)
    assert record(8, "desk-scale phase transition", ok,
                  "PESR " + " ".join(f"s={s}:{v:.2f}" for s, v in zip(grid, pesr))
                  + f"; max FDR {max(fdr):.3f}; failed replicates {failed}")


@pytest.mark.slow
def test_09_nonlinear_recovery():
    rep = run_benchmark((2,), SimConfig(n=750, p=10, design="abs_pairs", seed=9),
                        replicates=25, method="harder_qut", model="network", hidden=(20,))
    row = rep.row_for(2)
    ok = row["tpr"] >= 0.7 and row["fdr"] <= 0.2 and row["failed"] == 0
    assert record(9, "nonlinear recovery with a 20-unit ReLU network", ok,
                  f"TPR {row['tpr']:.3f} (>= 0.7), FDR {row['fdr']:.3f} (<= 0.2), "
                  f"PESR {row['pesr']:.2f}, failed {row['failed']}")


def test_10_cindex_oracle():
    rng = np.random.default_rng(10)
    exact = 0
    for _ in range(200):
        n = int(rng.integers(2, 60))
        y = rng.integers(0, 8, size=n).astype(float)
        c = rng.integers(0, 2, size=n)
        r = rng.integers(0, 5, size=n).astype(float)
        exact += concordance_counts(y, c, r) == oracles.cindex_counts(y, c, r)
    assert record(10, "C-index vs brute-force pair counting", exact == 200,
                  f"identical counts on {exact}/200 tied instances")


def test_11_network_rescaling():
    lam = 0.7312
    e1 = abs(rescale_for_network(lam, (37,)) - lam)
    e3 = abs(rescale_for_network(lam, (37, 20, 10)) / lam - math.sqrt(10))
    ok = e1 <= 1e-12 and e3 <= 1e-12
    assert record(11, "network threshold rescaling", ok,
                  f"L=1 error {e1:.1e}, L=3 factor error {e3:.1e} (tol 1e-12)")


def test_12_support_metric_conventions():
    universe = range(1, 9)
    subsets = [set(c) for k in range(9) for c in itertools.combinations(universe, k)]
    bad = 0
    for est in subsets:
        for truth in subsets:
            m = support_metrics(est, truth)
            hits = len(est & truth)
            tpr = hits / len(truth) if truth else 1.0
            fdr = (len(est) - hits) / len(est) if est else 0.0
            bad += (m.exact != (est == truth)) or m.tpr != tpr or m.fdr != fdr
    n_pairs = len(subsets) ** 2
    assert record(12, "support metric conventions (exhaustive)", bad == 0,
                  f"{n_pairs - bad}/{n_pairs} subset pairs agree")

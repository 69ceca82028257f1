"""Feed-forward log-risk network for nonlinear feature selection.

``mu(x) = W_L s(... s(W_1 x + b_1) ...)`` with no output bias: a constant
shift of ``mu`` is absorbed by the baseline hazard. Only ``W_1`` is
penalized; a feature is selected when its column of ``W_1`` is nonzero.

During fitting every row of ``W_2..W_L`` is kept on the unit sphere
(``W = V / ||V||`` row-wise). Otherwise the penalty on ``W_1`` could be
made arbitrarily small by shrinking ``W_1`` and growing the next layer,
and the network threshold scaling (which bounds each layer by the square
root of its width) would not apply.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coxcore import BaselineHazard, RiskSetIndex, breslow, build_risk_index, neg_loss_and_gradient
from .data import DataError, Standardization, SurvivalDataset, apply_standardization
from .errors import DegenerateLikelihoodError, NumericalError
from .optimizer import FitReport, PathSchedule, run_path, unpenalized_refit

ACTIVATIONS = ("relu", "tanh")
# sup |activation'|, the kappa of the network threshold rescaling
KAPPA = {"relu": 1.0, "tanh": 1.0}


def _act(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _dact(name, z, a):
    if name == "relu":
        return (z > 0).astype(float)
    return 1.0 - a * a


@dataclass
class NetworkCoxModel:
    """Layer weights ``W_1..W_L`` (``W_k`` has shape ``(out, in)``) and
    hidden-layer biases ``b_1..b_{L-1}``."""

    weights: list
    biases: list
    activation: str = "relu"
    standardization: Standardization | None = None
    baseline: BaselineHazard | None = None
    feature_names: tuple = ()

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.biases) != len(self.weights) - 1:
            raise ValueError("need one bias vector per hidden layer")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("the output layer must have a single unit")
        for k in range(1, len(self.weights)):
            if self.weights[k].shape[1] != self.weights[k - 1].shape[0]:
                raise ValueError(f"layer {k + 1} input width does not match layer {k} output")
        if self.standardization is None:
            self.standardization = Standardization.identity(self.n_inputs)

    @property
    def n_inputs(self) -> int:
        return self.weights[0].shape[1]

    @property
    def widths(self) -> tuple[int, ...]:
        """Input widths ``p_1..p_L`` of the weight layers."""
        return tuple(w.shape[1] for w in self.weights)

    @property
    def support(self) -> set[int]:
        return {int(j) for j in np.flatnonzero(np.any(self.weights[0] != 0, axis=0))}

    # flat parameter vector: W_1 first, then (b_1, W_2, b_2, ..., W_L)
    def shapes(self) -> list[tuple]:
        out = [self.weights[0].shape]
        for k in range(1, len(self.weights)):
            out += [self.biases[k - 1].shape, self.weights[k].shape]
        return out

    def flatten(self) -> np.ndarray:
        parts = [self.weights[0].ravel()]
        for k in range(1, len(self.weights)):
            parts += [self.biases[k - 1].ravel(), self.weights[k].ravel()]
        return np.concatenate(parts)

    def with_params(self, flat) -> "NetworkCoxModel":
        arrays, pos = [], 0
        for shape in self.shapes():
            size = int(np.prod(shape))
            arrays.append(np.array(flat[pos:pos + size], dtype=float).reshape(shape))
            pos += size
        weights = [arrays[0]] + arrays[2::2]
        biases = arrays[1::2]
        return NetworkCoxModel(weights, biases, self.activation, self.standardization,
                               self.baseline, self.feature_names)

    @property
    def n_penalized(self) -> int:
        return self.weights[0].size

    def log_risk(self, X_raw) -> np.ndarray:
        Z = apply_standardization(np.atleast_2d(X_raw), self.standardization)
        return forward(self, Z)

    def to_dict(self) -> dict:
        return {
            "kind": "network",
            "architecture": {"widths": list(self.widths), "activation": self.activation},
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "support": sorted(self.support),
            "feature_names": list(self.feature_names),
            "standardization": self.standardization.to_dict(),
            "baseline": None if self.baseline is None else self.baseline.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkCoxModel":
        base = d.get("baseline")
        return cls(
            [np.array(w, dtype=float).reshape(len(w), -1) for w in d["weights"]],
            [np.array(b, dtype=float) for b in d["biases"]],
            d["architecture"]["activation"],
            Standardization.from_dict(d["standardization"]),
            None if base is None else BaselineHazard.from_dict(base),
            tuple(d.get("feature_names", ())),
        )


def init_network(p: int, hidden: Sequence[int], activation: str = "relu",
                 seed: int = 0) -> NetworkCoxModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases."""
    rng = np.random.default_rng(seed)
    sizes = [p, *hidden, 1]
    weights, biases = [], []
    for k in range(len(sizes) - 1):
        bound = 1.0 / np.sqrt(sizes[k])
        weights.append(rng.uniform(-bound, bound, size=(sizes[k + 1], sizes[k])))
        if k < len(sizes) - 2:
            biases.append(rng.uniform(-bound, bound, size=sizes[k + 1]))
    for k in range(1, len(weights)):
        weights[k] = weights[k] / np.linalg.norm(weights[k], axis=1, keepdims=True)
    return NetworkCoxModel(weights, biases, activation)


def _forward_cache(model: NetworkCoxModel, X):
    acts, pre = [X], []
    a = X
    for k in range(len(model.weights) - 1):
        z = a @ model.weights[k].T + model.biases[k]
        a = _act(model.activation, z)
        pre.append(z)
        acts.append(a)
    mu = a @ model.weights[-1][0]
    return mu, acts, pre


def forward(model: NetworkCoxModel, X) -> np.ndarray:
    """Network output for each row of (already standardized) ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_inputs:
        raise DataError(f"expected an n x {model.n_inputs} matrix, got shape {X.shape}")
    return _forward_cache(model, X)[0]


def _backward(model: NetworkCoxModel, acts, pre, dmu) -> np.ndarray:
    L = len(model.weights)
    grads_w = [None] * L
    grads_b = [None] * (L - 1)
    grads_w[-1] = (dmu @ acts[-1])[None, :]
    delta = np.outer(dmu, model.weights[-1][0])
    for k in range(L - 2, -1, -1):
        delta = delta * _dact(model.activation, pre[k], acts[k + 1])
        grads_w[k] = delta.T @ acts[k]
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ model.weights[k]
    parts = [grads_w[0].ravel()]
    for k in range(1, L):
        parts += [grads_b[k - 1], grads_w[k].ravel()]
    return np.concatenate(parts)


def _row_normalizer(template: NetworkCoxModel):
    """Map ``V -> W`` (unit rows for layers 2..L) on the flat vector, and
    the matching pullback of gradients."""
    blocks, pos = [], 0
    for i, shape in enumerate(template.shapes()):
        size = int(np.prod(shape))
        if i >= 2 and i % 2 == 0:
            blocks.append((pos, shape))
        pos += size

    def normalize(v):
        w = v.copy()
        norms = []
        for start, shape in blocks:
            size = shape[0] * shape[1]
            V = v[start:start + size].reshape(shape)
            r = np.linalg.norm(V, axis=1, keepdims=True)
            if np.any(r == 0):
                raise NumericalError("a hidden-layer weight row collapsed to zero")
            w[start:start + size] = (V / r).ravel()
            norms.append(r)
        return w, norms

    def pullback(w, norms, g):
        g = g.copy()
        for (start, shape), r in zip(blocks, norms):
            size = shape[0] * shape[1]
            W = w[start:start + size].reshape(shape)
            G = g[start:start + size].reshape(shape)
            G = (G - np.sum(G * W, axis=1, keepdims=True) * W) / r
            g[start:start + size] = G.ravel()
        return g

    return normalize, pullback


def network_objective(template: NetworkCoxModel, d: SurvivalDataset,
                      idx: RiskSetIndex | None = None, unit_rows: bool = False):
    """``flat params -> (sqrt(-l(mu(X))), gradient)`` by backpropagation.

    With ``unit_rows`` the flat vector holds unnormalized ``V`` for layers
    2..L and the network uses their row-normalized versions.
    """
    idx = build_risk_index(d) if idx is None else idx
    X = d.covariates
    normalize, pullback = _row_normalizer(template)

    def fun(flat):
        if unit_rows:
            w, norms = normalize(np.asarray(flat, dtype=float))
        else:
            w = flat
        net = template.with_params(w)
        mu, acts, pre = _forward_cache(net, X)
        f, dmu = neg_loss_and_gradient(idx, mu)
        g = _backward(net, acts, pre, dmu)
        return f, (pullback(w, norms, g) if unit_rows else g)

    return fun


def gradient(model: NetworkCoxModel, d: SurvivalDataset, idx: RiskSetIndex | None = None):
    """Gradient of the square-root loss with respect to the flat parameter vector."""
    if not np.any(d.events):
        raise DegenerateLikelihoodError(
            "degenerate likelihood; square-root loss undefined at this point"
        )
    return network_objective(model, d, idx)(model.flatten())[1]


def reduce_inputs(model: NetworkCoxModel, keep) -> NetworkCoxModel:
    """Drop the input columns not in ``keep`` (and their W_1 columns)."""
    keep = np.asarray(sorted(keep), dtype=int)
    W1 = model.weights[0][:, keep]
    std = Standardization(model.standardization.means[keep], model.standardization.scales[keep])
    names = tuple(model.feature_names[j] for j in keep) if model.feature_names else ()
    return NetworkCoxModel([W1, *model.weights[1:]], model.biases, model.activation, std,
                           model.baseline, names)


def fit_network(d: SurvivalDataset, schedule: PathSchedule, hidden: Sequence[int] = (20,),
                activation: str = "relu", seed: int = 0,
                standardization: Standardization | None = None,
                refit: bool = True) -> tuple[NetworkCoxModel, FitReport]:
    """Annealed fit of the network on standardized data; ``schedule`` must
    already carry the network-rescaled penalty levels.

    After the path, inputs whose ``W_1`` column is zero are dropped, and the
    remaining parameters (nonzero ``W_1`` entries and all other layers) are
    retrained without penalty.
    """
    started = time.perf_counter()
    if not np.any(d.events):
        raise DegenerateLikelihoodError("no observed events")
    idx = build_risk_index(d)
    net = init_network(d.p, hidden, activation, seed)
    net.feature_names = d.feature_names
    fun = network_objective(net, d, idx, unit_rows=True)
    report = FitReport(schedule.mode)
    flat = run_path(fun, net.flatten().size, slice(0, net.n_penalized), schedule,
                    net.flatten(), report)
    net = net.with_params(_row_normalizer(net)[0](flat)[0])
    support = sorted(net.support)
    if refit and support:
        reduced = reduce_inputs(net, support)
        rd = d.with_covariates(d.covariates[:, support],
                               tuple(d.feature_names[j] for j in support))
        rfun = network_objective(reduced, rd, idx, unit_rows=True)
        full = reduced.flatten()
        free = np.ones(full.size, dtype=bool)
        free[:reduced.n_penalized] = full[:reduced.n_penalized] != 0

        def sub(v):
            x = full.copy()
            x[free] = v
            f, g = rfun(x)
            return f, g[free]

        v, ok, nit, gnorm = unpenalized_refit(sub, full[free])
        full[free] = v
        reduced = reduced.with_params(_row_normalizer(reduced)[0](full)[0])
        W1 = np.zeros_like(net.weights[0])
        W1[:, support] = reduced.weights[0]
        net = NetworkCoxModel([W1, *reduced.weights[1:]], reduced.biases, activation)
        report.refit = True
        report.refit_converged = ok
        report.refit_iterations = nit
        report.refit_grad_norm = gnorm
    net.standardization = standardization or Standardization.identity(d.p)
    net.feature_names = d.feature_names
    report.support = sorted(net.support)
    net.baseline = breslow(d, idx, forward(net, d.covariates))
    report.seconds = time.perf_counter() - started
    return net, report

"""Support-recovery metrics and Harrell's concordance index."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SupportMetrics:
    exact: bool
    tpr: float
    fdr: float


def support_metrics(est: Iterable[int], truth: Iterable[int]) -> SupportMetrics:
    """Exact recovery, true-positive rate and false-discovery rate of ``est``.

    Empty sets: FDR is 0 when nothing is selected; TPR is 1 when the truth
    is empty (false selections then show up in ``fdr`` and ``exact``).
    """
    est, truth = set(est), set(truth)
    hits = len(est & truth)
    tpr = hits / len(truth) if truth else 1.0
    fdr = (len(est) - hits) / len(est) if est else 0.0
    return SupportMetrics(est == truth, tpr, fdr)


class _Fenwick:
    def __init__(self, size: int):
        self.tree = np.zeros(size + 1, dtype=np.int64)

    def add(self, i: int, v: int = 1):
        i += 1
        tree = self.tree
        while i < tree.shape[0]:
            tree[i] += v
            i += i & -i

    def prefix(self, i: int) -> int:
        """Sum of entries ``0..i-1``."""
        s = 0
        tree = self.tree
        while i > 0:
            s += tree[i]
            i -= i & -i
        return int(s)


def concordance_counts(times, events, risk_scores) -> tuple[int, int, int]:
    """(concordant, tied-in-risk, comparable) pair counts, Harrell convention.

    A pair is comparable when ``y_i < y_j`` and ``c_i = 1``; it is
    concordant when ``risk_i > risk_j``.
    """
    y = np.asarray(times, dtype=float)
    c = np.asarray(events)
    r = np.asarray(risk_scores, dtype=float)
    if not (y.shape == c.shape == r.shape) or y.ndim != 1:
        raise DataError("times, events and risk scores must be 1-d of equal length")
    _, rank = np.unique(r, return_inverse=True)
    n_ranks = int(rank.max()) + 1 if rank.size else 0
    order = np.argsort(-y, kind="stable")
    fen = _Fenwick(n_ranks)
    inserted = 0
    conc = ties = comp = 0
    k = 0
    n = y.shape[0]
    while k < n:
        end = k
        while end < n and y[order[end]] == y[order[k]]:
            end += 1
        block = order[k:end]
        for i in block:
            if c[i] == 1:
                below = fen.prefix(int(rank[i]))
                same = fen.prefix(int(rank[i]) + 1) - below
                conc += below
                ties += same
                comp += inserted
        for i in block:
            fen.add(int(rank[i]))
        inserted += block.shape[0]
        k = end
    return conc, ties, comp


def concordance_index(times, events, risk_scores) -> float:
    """Harrell's C; risk ties count one half."""
    conc, ties, comp = concordance_counts(times, events, risk_scores)
    if comp == 0:
        raise DataError("no comparable pair for the concordance index")
    return (conc + 0.5 * ties) / comp

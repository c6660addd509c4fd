"""AUC, adjusted mutual information, learning-rate schedule, epoch selection."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import rankdata


class SingleClassError(ValueError):
    """AUC is undefined when only one label class is present."""


def auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Ties between a positive and a negative count one half.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape or scores.size == 0:
        raise ValueError("scores and labels must be nonempty and equally long")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 or 1")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)  # average ranks for ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# ---------------------------------------------------------------------------
# adjusted mutual information
# ---------------------------------------------------------------------------


def _contingency(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        raise ValueError("clusterings must cover the same elements")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def mutual_information(a, b) -> float:
    table = _contingency(a, b)
    n = table.sum()
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    nz = table > 0
    nij = table[nz]
    outer = np.outer(rows, cols)[nz]
    return float(np.sum(nij / n * (np.log(nij * n) - np.log(outer))))


def expected_mutual_information(rows, cols, n) -> float:
    """E[MI] under the hypergeometric model with fixed marginals."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    lg_n = gammaln(n + 1)
    emi = 0.0
    for ai in rows:
        for bj in cols:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1)
            term = nij / n * (np.log(nij * n) - math.log(ai * bj))
            log_p = (
                gammaln(ai + 1)
                + gammaln(bj + 1)
                + gammaln(n - ai + 1)
                + gammaln(n - bj + 1)
                - lg_n
                - gammaln(nij + 1)
                - gammaln(ai - nij + 1)
                - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float(np.sum(term * np.exp(log_p)))
    return emi


def _same_partition(table) -> bool:
    return bool(np.all((table > 0).sum(axis=1) == 1) and np.all((table > 0).sum(axis=0) == 1))


def adjusted_mutual_information(a, b) -> float:
    """(MI - E[MI]) / (max(H(a), H(b)) - E[MI]).

    Partitions that coincide up to relabeling score exactly 1.0.  When the
    denominator vanishes otherwise the result is 0.0.
    """
    table = _contingency(a, b)
    if _same_partition(table):
        return 1.0
    n = int(table.sum())
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    mi = mutual_information(a, b)
    emi = expected_mutual_information(rows, cols, n)
    denom = max(_entropy(rows, n), _entropy(cols, n)) - emi
    if abs(denom) < 1e-15:
        return 0.0
    return float((mi - emi) / denom)


# ---------------------------------------------------------------------------
# schedule and selection
# ---------------------------------------------------------------------------


def lr_schedule(lr0: float, epoch: int, period: int = 20, factor: float = 1.5, stop: int = 100) -> float:
    """Divide by ``factor`` every ``period`` epochs; frozen from epoch ``stop`` on."""
    if lr0 < 0:
        raise ValueError("learning rate must be non-negative")
    e = min(epoch, stop - 1)
    return lr0 / factor ** (e // period)


def select_best_epoch(history: Sequence[float]) -> int:
    """Index of the highest validation AUC; earliest wins ties."""
    if len(history) == 0:
        raise ValueError("empty history")
    return int(np.argmax(np.asarray(history, dtype=float)))

"""Censoring-aware evaluation metrics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .survival import AftParams, aft_loss_array, check_survival_target


@dataclass(frozen=True)
class ConcordanceResult:
    """Harrell-style concordance.

    ``concordant`` counts prediction ties as one half. ``c_index`` is NaN and
    ``defined`` is False when there are no comparable pairs.
    """

    c_index: float
    comparable_pairs: int
    concordant: float

    @property
    def defined(self) -> bool:
        return self.comparable_pairs > 0


class _Fenwick:
    def __init__(self, n):
        self.tree = np.zeros(n + 1, dtype=np.int64)

    def add(self, i):
        i += 1
        while i < self.tree.size:
            self.tree[i] += 1
            i += i & -i

    def prefix(self, i):
        """Count of inserted ranks ``< i``."""
        s = 0
        while i > 0:
            s += self.tree[i]
            i -= i & -i
        return int(s)


def concordance_index(labels, predicted_days) -> ConcordanceResult:
    """Probability that the longer-lived member of a comparable pair gets the larger prediction.

    A pair is comparable when the member with the strictly smaller lower bound
    has an observed event. Pairs with equal lower bounds are skipped. Runs in
    ``O(n log n)``.
    """
    lower, upper = check_survival_target(labels)
    pred = np.asarray(predicted_days, dtype=float).ravel()
    if pred.shape != lower.shape:
        raise ValueError(f"{lower.size} labels but {pred.size} predictions")
    if lower.size < 2:
        raise ValueError("concordance needs at least two rows")
    event = lower == upper

    ranks = np.unique(pred, return_inverse=True)[1]
    bit = _Fenwick(int(ranks.max()) + 1)
    order = np.argsort(-lower, kind="stable")

    comparable = 0
    twice_concordant = 0
    inserted = 0
    k = 0
    n = lower.size
    while k < n:
        # one block of equal times: score against strictly longer times, then insert
        t = lower[order[k]]
        end = k
        while end < n and lower[order[end]] == t:
            end += 1
        block = order[k:end]
        for i in block:
            if not event[i] or inserted == 0:
                continue
            r = int(ranks[i])
            below = bit.prefix(r)
            not_above = bit.prefix(r + 1)
            comparable += inserted
            twice_concordant += 2 * (inserted - not_above) + (not_above - below)
        for i in block:
            bit.add(int(ranks[i]))
        inserted += len(block)
        k = end

    if comparable == 0:
        return ConcordanceResult(math.nan, 0, 0.0)
    concordant = twice_concordant / 2
    return ConcordanceResult(concordant / comparable, comparable, concordant)


def mean_negloglik(labels, tau, params: AftParams = AftParams()) -> float:
    """Arithmetic mean of the per-row AFT loss at log-time predictions ``tau``."""
    lower, upper = check_survival_target(labels)
    tau = np.asarray(tau, dtype=float).ravel()
    if lower.size == 0:
        raise ValueError("mean_negloglik of an empty sample")
    if tau.shape != lower.shape:
        raise ValueError(f"{lower.size} labels but {tau.size} predictions")
    return float(np.mean(aft_loss_array(lower, upper, tau, params)))

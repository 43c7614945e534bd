import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aftboost.metrics import concordance_index, mean_negloglik
from aftboost.survival import AftParams, SurvivalLabel, aft_loss

from oracles import brute_concordance


def _bounds(rng, n, censor=0.3, ties=False):
    t = rng.integers(1, 40, size=n).astype(float) if ties else rng.exponential(50, size=n) + 1
    upper = np.where(rng.random(n) < censor, np.inf, t)
    return np.c_[t, upper]


def test_perfect_and_reversed():
    y = np.c_[[1.0, 2, 3, 4], [1.0, 2, 3, 4]]
    assert concordance_index(y, [10, 20, 30, 40]).c_index == 1.0
    assert concordance_index(y, [40, 30, 20, 10]).c_index == 0.0
    assert concordance_index(y, [5, 5, 5, 5]).c_index == 0.5


def test_only_events_anchor_pairs():
    labels = [SurvivalLabel.right_censored(2.0), SurvivalLabel.observed(5.0), SurvivalLabel.observed(9.0)]
    res = concordance_index(labels, [1.0, 2.0, 3.0])
    assert res.comparable_pairs == 1 and res.concordant == 1


def test_undefined_without_comparable_pairs():
    res = concordance_index(np.c_[[3.0, 4.0], [np.inf, np.inf]], [1.0, 2.0])
    assert not res.defined and math.isnan(res.c_index)


def test_input_errors():
    with pytest.raises(ValueError):
        concordance_index(np.c_[[1.0, 2.0], [1.0, 2.0]], [1.0])
    with pytest.raises(ValueError):
        concordance_index(np.c_[[1.0], [1.0]], [1.0])


@pytest.mark.parametrize("seed", range(20))
def test_matches_pairwise_enumeration(seed):
    rng = np.random.default_rng(seed)
    y = _bounds(rng, 150, ties=seed % 2 == 0)
    pred = np.round(rng.normal(size=150), 1 if seed % 3 == 0 else 8)
    twice, comparable = brute_concordance(y[:, 0], y[:, 1], pred)
    res = concordance_index(y, pred)
    assert res.comparable_pairs == comparable
    assert 2 * res.concordant == twice


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), transform=st.sampled_from(["exp", "cube", "affine"]))
def test_invariant_to_monotone_transform(seed, transform):
    rng = np.random.default_rng(seed)
    y = _bounds(rng, 80)
    pred = rng.normal(size=80)
    f = {"exp": np.exp, "cube": lambda v: v**3, "affine": lambda v: 3.0 * v + 7.0}[transform]
    a = concordance_index(y, pred)
    b = concordance_index(y, f(pred))
    assert (a.comparable_pairs, a.concordant) == (b.comparable_pairs, b.concordant)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_reversed_predictions_give_complement(seed):
    rng = np.random.default_rng(seed)
    y = _bounds(rng, 60, ties=True)
    pred = np.round(rng.normal(size=60), 1)
    a = concordance_index(y, pred)
    b = concordance_index(y, -pred)
    if a.defined:
        assert a.c_index + b.c_index == pytest.approx(1.0, abs=1e-12)


def test_random_predictions_average_half():
    rng = np.random.default_rng(2024)
    values = []
    for _ in range(30):
        y = _bounds(rng, 500)
        values.append(concordance_index(y, rng.random(500)).c_index)
    assert abs(np.mean(values) - 0.5) < 0.05


def test_mean_negloglik():
    labels = [SurvivalLabel.observed(3.0), SurvivalLabel.right_censored(10.0)]
    p = AftParams(0.8, "logistic")
    tau = [1.0, 2.0]
    expected = (aft_loss(labels[0], 1.0, p) + aft_loss(labels[1], 2.0, p)) / 2
    assert mean_negloglik(labels, tau, p) == pytest.approx(expected, rel=1e-15)
    with pytest.raises(ValueError):
        mean_negloglik(labels, [1.0], p)

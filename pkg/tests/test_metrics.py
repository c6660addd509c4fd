import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from knowtrace.metrics import (
    SingleClassError,
    adjusted_mutual_information,
    auc,
    expected_mutual_information,
    lr_schedule,
    mutual_information,
    select_best_epoch,
)


def pairwise_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return total / (len(pos) * len(neg))


def test_auc_examples():
    assert auc([0.1, 0.9], [0, 1]) == 1.0
    assert auc([0.9, 0.1], [0, 1]) == 0.0
    assert auc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert auc([0.2, 0.4, 0.4, 0.9], [0, 0, 1, 1]) == pytest.approx(pairwise_auc([0.2, 0.4, 0.4, 0.9], [0, 0, 1, 1]))


def test_auc_matches_pairwise_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 8, n) / 7.0  # coarse grid forces ties
        assert abs(auc(scores, labels) - pairwise_auc(scores, labels)) < 1e-12


@pytest.mark.parametrize("labels", [[1, 1, 1], [0, 0]])
def test_auc_single_class(labels):
    with pytest.raises(SingleClassError):
        auc(np.zeros(len(labels)), labels)


def test_auc_input_validation():
    with pytest.raises(ValueError):
        auc([0.1, 0.2], [0, 2])
    with pytest.raises(ValueError):
        auc([0.1], [0, 1])


# ---- AMI -------------------------------------------------------------------


def brute_force_emi(a, b):
    """Average MI over every permutation of the second labelling."""
    n = len(a)
    vals = [mutual_information(a, [b[i] for i in perm]) for perm in itertools.permutations(range(n))]
    return sum(vals) / len(vals)


@pytest.mark.parametrize(
    "a,b",
    [([1, 1, 2, 2], [1, 2, 1, 2]), ([1, 1, 1, 2], [1, 2, 2, 2]), ([1, 2, 3, 3], [1, 1, 2, 2]), ([1, 2, 3, 4, 4], [2, 2, 1, 1, 3])],
)
def test_emi_matches_permutation_oracle(a, b):
    _, ca = np.unique(a, return_counts=True)
    _, cb = np.unique(b, return_counts=True)
    assert expected_mutual_information(ca, cb, len(a)) == pytest.approx(brute_force_emi(a, b), abs=1e-12)


def test_ami_identity_and_relabel():
    a = [1, 1, 2, 2, 3, 3, 3]
    assert adjusted_mutual_information(a, a) == 1.0
    assert adjusted_mutual_information(a, [7, 7, 5, 5, 9, 9, 9]) == pytest.approx(1.0, abs=1e-12)


def test_ami_hand_value():
    # a = [1,1,2,2], b = [1,2,1,2]: MI = 0, E[MI] from the permutation average
    a, b = [1, 1, 2, 2], [1, 2, 1, 2]
    emi = brute_force_emi(a, b)
    expect = (0.0 - emi) / (math.log(2) - emi)
    assert adjusted_mutual_information(a, b) == pytest.approx(expect, abs=1e-12)


def test_ami_degenerate_single_clusters():
    assert adjusted_mutual_information([1, 1, 1], [2, 2, 2]) == 1.0


def test_ami_near_zero_for_independent(rng):
    vals = [adjusted_mutual_information(rng.integers(0, 5, 200), rng.integers(0, 5, 200)) for _ in range(20)]
    assert abs(np.mean(vals)) < 0.02


@given(st.lists(st.integers(0, 3), min_size=2, max_size=25), st.randoms())
def test_ami_symmetric_permutation_invariant(a, rnd):
    b = [rnd.randint(0, 3) for _ in a]
    v = adjusted_mutual_information(a, b)
    assert v <= 1.0 + 1e-12
    assert v == pytest.approx(adjusted_mutual_information(b, a), abs=1e-10)
    relabel = {x: 10 - x for x in set(a)}
    assert v == pytest.approx(adjusted_mutual_information([relabel[x] for x in a], b), abs=1e-10)


# ---- schedule / selection ---------------------------------------------------


def test_lr_schedule_spot_values():
    g = 0.01
    assert lr_schedule(g, 0) == g
    assert lr_schedule(g, 19) == g
    assert lr_schedule(g, 20) == g / 1.5
    assert lr_schedule(g, 25) == g / 1.5
    assert lr_schedule(g, 45) == g / 1.5**2
    assert lr_schedule(g, 99) == g / 1.5**4
    assert lr_schedule(g, 100) == lr_schedule(g, 250) == g / 1.5**4


def test_lr_schedule_rejects_negative():
    with pytest.raises(ValueError):
        lr_schedule(-1.0, 0)


def test_best_epoch():
    assert select_best_epoch([0.6, 0.7, 0.65]) == 1
    assert select_best_epoch([0.6, 0.7, 0.7, 0.5]) == 1
    with pytest.raises(ValueError):
        select_best_epoch([])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=50))
def test_best_epoch_is_earliest_max(hist):
    e = select_best_epoch(hist)
    assert hist[e] == max(hist)
    assert all(h < hist[e] for h in hist[:e])

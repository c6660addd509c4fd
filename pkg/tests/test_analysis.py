import numpy as np
import pytest

from knowtrace import analysis, dkvmn, trainer
from knowtrace.encoding import StudentSequence


def ckpt(Q=6, N=3, d=3, seed=0):
    return trainer.init_model(trainer.TrainConfig(d=d, n=N, seed=seed, sigma=0.5), Q)


def test_discovery_basic():
    ck = ckpt()
    rep = analysis.discover_concepts(ck)
    assert rep.weights.shape == (6, 3)
    np.testing.assert_allclose(rep.weights.sum(1), 1.0, atol=1e-6)
    assert set(rep.clusters) <= {1, 2, 3}
    np.testing.assert_array_equal(rep.max_weight, rep.weights.max(1))
    assert rep.ami is None


def test_discovery_recovers_planted_concepts():
    ck = ckpt(Q=6, N=3, d=3)
    truth = np.array([2, 1, 3, 3, 1, 2])
    ck.params["Mk"][...] = 10 * np.eye(3)
    ck.params["A"][...] = np.eye(3)[truth - 1]
    rep = analysis.discover_concepts(ck, truth)
    np.testing.assert_array_equal(rep.clusters, truth)
    assert rep.ami == 1.0 and rep.n_clusters == 3


def test_ties_go_to_first_concept():
    ck = ckpt()
    ck.params["Mk"][...] = ck.params["Mk"][0]
    rep = analysis.discover_concepts(ck)
    np.testing.assert_array_equal(rep.clusters, 1)
    assert rep.n_clusters == 1


def test_reordering_invariance(rng):
    ck = ckpt(Q=8)
    order = rng.permutation(8) + 1
    full = analysis.discover_concepts(ck)
    sub = analysis.discover_concepts(ck, exercises=order)
    np.testing.assert_array_equal(sub.clusters, full.clusters[order - 1])
    np.testing.assert_array_equal(sub.weights, full.weights[order - 1])


def test_rejects_non_dkvmn():
    ck = trainer.init_model(trainer.TrainConfig(model="dkt", d=3), 4)
    with pytest.raises(ValueError):
        analysis.discover_concepts(ck)
    with pytest.raises(ValueError):
        analysis.trace_knowledge_state(ck, StudentSequence([1], [1]))


def test_trace_shapes_and_range(rng):
    ck = ckpt()
    s = StudentSequence(rng.integers(1, 7, 9), rng.integers(0, 2, 9))
    tr = analysis.trace_knowledge_state(ck, s)
    assert tr.states.shape == (10, 3) and len(tr) == 10
    assert np.all((tr.states > 0) & (tr.states < 1))
    np.testing.assert_array_equal(tr.states[0], dkvmn.depict_knowledge_state(ck.params, ck.params["Mv0"]))
    empty = analysis.trace_knowledge_state(ck, StudentSequence([], []))
    assert empty.states.shape == (1, 3)


def test_trace_deterministic(rng):
    ck = ckpt()
    s = StudentSequence(rng.integers(1, 7, 5), rng.integers(0, 2, 5))
    a = analysis.trace_knowledge_state(ck, s).states
    b = analysis.trace_knowledge_state(ck, s).states
    assert np.array_equal(a, b)


def test_raise_fraction_in_unit_interval(rng):
    ck = ckpt()
    traces = [analysis.trace_knowledge_state(ck, StudentSequence(rng.integers(1, 7, 6), np.ones(6, int))) for _ in range(3)]
    f = analysis.correct_answer_raise_fraction(ck, traces)
    assert 0 <= f <= 1


def test_exports():
    ck = ckpt(Q=4, N=2)
    rep = analysis.discover_concepts(ck)
    w = analysis.parse_csv_matrix(analysis.serialize_weights(rep))
    assert w[0] == ["exercise_id", "concept_1", "concept_2"] and len(w) == 5
    np.testing.assert_array_equal(np.array(w[1:], dtype=float)[:, 1:], rep.weights)
    c = analysis.parse_csv_matrix(analysis.serialize_clusters(rep))
    assert c[0] == ["exercise_id", "concept_id", "max_weight"]
    tr = analysis.trace_knowledge_state(ck, StudentSequence([1, 2], [1, 0]))
    t = analysis.parse_csv_matrix(analysis.serialize_trace(tr))
    assert t[0][:3] == ["step", "exercise_id", "response"]
    assert t[1][:3] == ["0", "", ""] and t[2][:3] == ["1", "1", "1"]

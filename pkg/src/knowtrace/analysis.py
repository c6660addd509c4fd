"""Concept discovery and knowledge-state traces from a trained DKVMN."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import dkvmn
from .checkpoint import Checkpoint
from .encoding import StudentSequence
from .metrics import adjusted_mutual_information


def _require_dkvmn(ckpt: Checkpoint) -> None:
    if ckpt.kind != dkvmn.KIND:
        raise ValueError(f"concept analysis needs a dkvmn checkpoint, got {ckpt.kind!r}")


@dataclass
class ConceptDiscoveryReport:
    exercises: np.ndarray  # 1-based ids, row order of ``weights``
    weights: np.ndarray  # (len(exercises), N)
    clusters: np.ndarray  # 1-based concept per exercise
    max_weight: np.ndarray
    ami: Optional[float] = None

    @property
    def n_clusters(self) -> int:
        return int(np.unique(self.clusters).size)


def discover_concepts(ckpt: Checkpoint, ground_truth=None, exercises: Optional[Sequence[int]] = None):
    """Assign each exercise to the concept with the largest correlation weight.

    ``ground_truth`` is an array of true concept labels indexed by exercise id
    - 1 (or a :class:`~knowtrace.synthgen.GroundTruth`).  Ties go to the lowest
    concept index.
    """
    _require_dkvmn(ckpt)
    W_all = dkvmn.correlation_weight_matrix(ckpt.params)
    Q = W_all.shape[0]
    ex = np.arange(1, Q + 1) if exercises is None else np.asarray(exercises, dtype=np.int64)
    if ex.size and (ex.min() < 1 or ex.max() > Q):
        raise ValueError(f"exercise ids must lie in [1, {Q}]")
    W = W_all[ex - 1]
    clusters = W.argmax(axis=1) + 1
    ami = None
    if ground_truth is not None:
        truth = np.asarray(getattr(ground_truth, "concept", ground_truth))
        ami = adjusted_mutual_information(clusters, truth[ex - 1])
    return ConceptDiscoveryReport(ex, W, clusters, W.max(axis=1), ami)


@dataclass
class KnowledgeStateTrace:
    questions: np.ndarray
    responses: np.ndarray
    states: np.ndarray  # (L+1, N); row 0 is the initial state

    def __len__(self) -> int:
        return int(self.states.shape[0])


def trace_knowledge_state(ckpt: Checkpoint, seq: StudentSequence) -> KnowledgeStateTrace:
    """Per-concept mastery before any interaction and after every write."""
    _require_dkvmn(ckpt)
    mems = dkvmn.memory_trajectory(ckpt.params, seq.questions, seq.responses)
    states = np.stack([dkvmn.depict_knowledge_state(ckpt.params, M) for M in mems])
    return KnowledgeStateTrace(np.asarray(seq.questions), np.asarray(seq.responses), states)


def correct_answer_raise_fraction(ckpt: Checkpoint, traces: Sequence[KnowledgeStateTrace]) -> float:
    """Share of correct answers after which the answered exercise's concept state went up."""
    clusters = discover_concepts(ckpt).clusters
    ups = total = 0
    for tr in traces:
        for t, (q, r) in enumerate(zip(tr.questions, tr.responses)):
            if r != 1:
                continue
            c = clusters[int(q) - 1] - 1
            total += 1
            ups += tr.states[t + 1, c] > tr.states[t, c]
    return ups / total if total else float("nan")


# ---------------------------------------------------------------------------
# text exports
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def serialize_weights(report: ConceptDiscoveryReport) -> str:
    N = report.weights.shape[1]
    rows = ["exercise_id," + ",".join(f"concept_{i + 1}" for i in range(N))]
    for e, w in zip(report.exercises, report.weights):
        rows.append(f"{int(e)}," + ",".join(_fmt(x) for x in w))
    return "\n".join(rows) + "\n"


def serialize_clusters(report: ConceptDiscoveryReport) -> str:
    rows = ["exercise_id,concept_id,max_weight"]
    for e, c, m in zip(report.exercises, report.clusters, report.max_weight):
        rows.append(f"{int(e)},{int(c)},{_fmt(m)}")
    return "\n".join(rows) + "\n"


def serialize_trace(trace: KnowledgeStateTrace) -> str:
    N = trace.states.shape[1]
    rows = ["step,exercise_id,response," + ",".join(f"concept_{i + 1}" for i in range(N))]
    for t, s in enumerate(trace.states):
        if t == 0:
            q, r = "", ""
        else:
            q, r = int(trace.questions[t - 1]), int(trace.responses[t - 1])
        rows.append(f"{t},{q},{r}," + ",".join(_fmt(x) for x in s))
    return "\n".join(rows) + "\n"


def parse_csv_matrix(text: str) -> List[List[str]]:
    return [ln.split(",") for ln in text.splitlines() if ln.strip()]

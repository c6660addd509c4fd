"""Synthetic students with hidden concepts.

Each exercise belongs to one hidden concept and has a difficulty.  A student
holds one ability per concept, answers each exercise with probability
``guess + (1 - guess) * sigmoid(ability - difficulty)`` and gains a fixed
learning increment on that concept after every attempt.  All students answer
every exercise once, in one shared shuffled order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from .diffcore import sigmoid
from .encoding import StudentSequence, write_triplet_file


@dataclass
class SynthConfig:
    n_train: int = 400
    n_test: int = 400
    n_exercises: int = 50
    n_concepts: int = 5
    seq_len: int = 50
    guess: float = 0.25
    learn_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_concepts > self.n_exercises:
            raise ValueError("more concepts than exercises")
        if min(self.n_train, self.n_test, self.n_exercises, self.n_concepts, self.seq_len) < 1:
            raise ValueError("counts must be positive")
        if not 0.0 <= self.guess <= 1.0:
            raise ValueError("guess must be a probability")

    @classmethod
    def full_scale(cls, seed: int = 0) -> "SynthConfig":
        return cls(n_train=2000, n_test=2000, seed=seed)


class GroundTruth(NamedTuple):
    concept: np.ndarray  # (E,) 1-based concept of exercise e+1
    difficulty: np.ndarray  # (E,)


class SynthDataset(NamedTuple):
    train: List[StudentSequence]
    test: List[StudentSequence]
    truth: GroundTruth


def response_prob(ability, difficulty, guess: float):
    return guess + (1.0 - guess) * sigmoid(np.asarray(ability) - np.asarray(difficulty))


def _students(rng, n, order, truth, cfg, id_offset):
    concept0 = truth.concept - 1
    seqs = []
    for s in range(n):
        ability = rng.standard_normal(cfg.n_concepts)
        u = rng.random(order.size)
        resp = np.empty(order.size, dtype=np.int64)
        for t, e in enumerate(order):
            c = concept0[e]
            resp[t] = u[t] < response_prob(ability[c], truth.difficulty[e], cfg.guess)
            ability[c] += cfg.learn_rate
        seqs.append(StudentSequence(order + 1, resp, student_id=id_offset + s))
    return seqs


def generate(cfg: SynthConfig) -> SynthDataset:
    rng = np.random.default_rng(cfg.seed)
    E = cfg.n_exercises
    concept = rng.permutation(np.arange(E) % cfg.n_concepts) + 1
    difficulty = rng.standard_normal(E)
    truth = GroundTruth(concept, difficulty)
    # sequence of exercise ids (0-based); cycles through a shuffled order if longer than E
    perm = rng.permutation(E)
    order = np.resize(perm, cfg.seq_len)
    train = _students(np.random.default_rng([cfg.seed, 1]), cfg.n_train, order, truth, cfg, 0)
    test = _students(np.random.default_rng([cfg.seed, 2]), cfg.n_test, order, truth, cfg, cfg.n_train)
    return SynthDataset(train, test, truth)


def serialize_ground_truth(truth: GroundTruth) -> str:
    rows = ["exercise_id,concept_id,difficulty"]
    for e, (c, d) in enumerate(zip(truth.concept, truth.difficulty)):
        rows.append(f"{e + 1},{int(c)},{d:.17g}")
    return "\n".join(rows) + "\n"


def parse_ground_truth(text: str) -> GroundTruth:
    lines = [ln for ln in text.splitlines() if ln.strip()][1:]
    recs = sorted((int(a), int(b), float(c)) for a, b, c in (ln.split(",") for ln in lines))
    if [r[0] for r in recs] != list(range(1, len(recs) + 1)):
        raise ValueError("ground truth must list exercise ids 1..E")
    return GroundTruth(
        np.array([r[1] for r in recs], dtype=np.int64), np.array([r[2] for r in recs])
    )


def write_dataset(ds: SynthDataset, out_dir) -> dict:
    """Write train.txt, test.txt and ground_truth.csv under ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    write_triplet_file(os.path.join(out_dir, "train.txt"), ds.train)
    write_triplet_file(os.path.join(out_dir, "test.txt"), ds.test)
    with open(os.path.join(out_dir, "ground_truth.csv"), "w") as fh:
        fh.write(serialize_ground_truth(ds.truth))
    return dataset_summary(ds)


def dataset_summary(ds: SynthDataset) -> dict:
    seqs = ds.train + ds.test
    return {
        "students": len(seqs),
        "exercise_tags": int(ds.truth.concept.size),
        "records": int(sum(len(s) for s in seqs)),
    }

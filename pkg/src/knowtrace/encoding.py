"""Exercise/response encodings, padding, dataset splits and the triplet format.

Exercise tags are 1-based.  The key-side index of exercise ``q`` is ``q``
itself; the value-side index of ``(q, r)`` is ``q + r*Q`` in ``[1, 2Q]``.
Index ``0`` is reserved for padding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

PAD = 0


class Interaction(NamedTuple):
    q: int
    r: int


@dataclass
class StudentSequence:
    questions: np.ndarray
    responses: np.ndarray
    student_id: object = None

    def __post_init__(self):
        self.questions = np.asarray(self.questions, dtype=np.int64)
        self.responses = np.asarray(self.responses, dtype=np.int64)
        if self.questions.shape != self.responses.shape or self.questions.ndim != 1:
            raise ValueError("questions and responses must be 1-D and equally long")

    @classmethod
    def from_interactions(cls, interactions: Sequence[Tuple[int, int]], student_id=None):
        qs = [int(q) for q, _ in interactions]
        rs = [int(r) for _, r in interactions]
        return cls(np.array(qs, dtype=np.int64), np.array(rs, dtype=np.int64), student_id)

    def __len__(self) -> int:
        return int(self.questions.size)

    @property
    def interactions(self) -> List[Interaction]:
        return [Interaction(int(q), int(r)) for q, r in zip(self.questions, self.responses)]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, StudentSequence)
            and np.array_equal(self.questions, other.questions)
            and np.array_equal(self.responses, other.responses)
        )


@dataclass
class PaddedBatch:
    """Rows of fixed length ``T``; ``mask`` marks the original-length prefix."""

    keys: np.ndarray  # (B, T) exercise tags, PAD where masked
    values: np.ndarray  # (B, T) q + r*Q, PAD where masked
    responses: np.ndarray  # (B, T) 0/1, 0 where masked
    mask: np.ndarray  # (B, T) bool

    def __len__(self) -> int:
        return int(self.keys.shape[0])

    @property
    def T(self) -> int:
        return int(self.keys.shape[1])

    def take(self, rows) -> "PaddedBatch":
        return PaddedBatch(self.keys[rows], self.values[rows], self.responses[rows], self.mask[rows])

    @classmethod
    def concat(cls, batches: Sequence["PaddedBatch"]) -> "PaddedBatch":
        return cls(
            np.concatenate([b.keys for b in batches]),
            np.concatenate([b.values for b in batches]),
            np.concatenate([b.responses for b in batches]),
            np.concatenate([b.mask for b in batches]),
        )


def encode_key_index(q: int, n_questions: int) -> int:
    if not 1 <= q <= n_questions:
        raise ValueError(f"exercise tag {q} outside [1, {n_questions}]")
    return int(q)


def encode_value_index(q, r, n_questions: int):
    """``q + r*Q``; works elementwise on arrays."""
    q = np.asarray(q)
    r = np.asarray(r)
    if np.any((q < 1) | (q > n_questions)):
        raise ValueError(f"exercise tag outside [1, {n_questions}]")
    if np.any((r != 0) & (r != 1)):
        raise ValueError("response must be 0 or 1")
    x = q + r * n_questions
    return int(x) if x.ndim == 0 else x


def pad_sequence(seq: StudentSequence, T_max: int, n_questions: int) -> PaddedBatch:
    """Split ``seq`` into chunks of at most ``T_max`` and pad each to ``T_max``."""
    if T_max < 1:
        raise ValueError("T_max must be >= 1")
    L = len(seq)
    if L == 0:
        raise ValueError("cannot pad an empty sequence")
    values = encode_value_index(seq.questions, seq.responses, n_questions)
    n_rows = -(-L // T_max)
    keys = np.zeros((n_rows, T_max), dtype=np.int64)
    vals = np.zeros((n_rows, T_max), dtype=np.int64)
    resp = np.zeros((n_rows, T_max), dtype=np.int64)
    mask = np.zeros((n_rows, T_max), dtype=bool)
    for row in range(n_rows):
        lo = row * T_max
        hi = min(L, lo + T_max)
        n = hi - lo
        keys[row, :n] = seq.questions[lo:hi]
        vals[row, :n] = values[lo:hi]
        resp[row, :n] = seq.responses[lo:hi]
        mask[row, :n] = True
    return PaddedBatch(keys, vals, resp, mask)


def pad_sequences(seqs: Sequence[StudentSequence], T_max: int, n_questions: int) -> PaddedBatch:
    if not seqs:
        raise ValueError("no sequences to pad")
    return PaddedBatch.concat([pad_sequence(s, T_max, n_questions) for s in seqs])


def unpad(batch: PaddedBatch, row: int = 0) -> StudentSequence:
    m = batch.mask[row]
    return StudentSequence(batch.keys[row][m], batch.responses[row][m])


def split_dataset(
    seqs: Sequence[StudentSequence],
    test_fraction: float = 0.3,
    valid_fraction_of_train: float = 0.2,
    seed: int = 0,
):
    """Shuffle whole sequences by ``seed`` and cut into (train, valid, test)."""
    n = len(seqs)
    if n < 5:
        raise ValueError(f"need at least 5 sequences to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_test = min(max(int(round(test_fraction * n)), 1), n - 2)
    n_rest = n - n_test
    n_valid = min(max(int(round(valid_fraction_of_train * n_rest)), 1), n_rest - 1)
    test = [seqs[i] for i in order[:n_test]]
    valid = [seqs[i] for i in order[n_test : n_test + n_valid]]
    train = [seqs[i] for i in order[n_test + n_valid :]]
    return train, valid, test


def split_train_valid(seqs: Sequence[StudentSequence], valid_fraction: float = 0.2, seed: int = 0):
    n = len(seqs)
    if n < 2:
        raise ValueError("need at least 2 sequences")
    order = np.random.default_rng(seed).permutation(n)
    n_valid = min(max(int(round(valid_fraction * n)), 1), n - 1)
    return [seqs[i] for i in order[n_valid:]], [seqs[i] for i in order[:n_valid]]


# ---------------------------------------------------------------------------
# triplet text format
# ---------------------------------------------------------------------------


class FormatError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _ints(text: str, lineno: int) -> List[int]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            out.append(int(tok))
        except ValueError:
            raise FormatError(lineno, f"non-integer token {tok!r}") from None
    return out


def parse_triplet_format(
    text: str, vocab: Optional[Dict[int, int]] = None
) -> Tuple[List[StudentSequence], Dict[int, int]]:
    """Parse three-line records (count / tags / responses).

    Tags are remapped to dense ids ``1..Q`` in ascending order of the original
    tag unless ``vocab`` (original -> dense) is supplied, in which case unknown
    tags are rejected.  Returns ``(sequences, vocab)``.
    """
    lines = text.split("\n")
    while lines and not lines[-1].strip():
        lines.pop()
    raw = []
    i = 0
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        head = i + 1
        try:
            n = int(lines[i].strip())
        except ValueError:
            raise FormatError(head, f"expected interaction count, got {lines[i].strip()!r}") from None
        if n < 1:
            raise FormatError(head, "interaction count must be positive")
        if i + 2 >= len(lines):
            raise FormatError(min(i + 3, len(lines) + 1), "truncated record")
        tags = _ints(lines[i + 1], head + 1)
        if len(tags) != n:
            raise FormatError(head + 1, f"expected {n} exercise tags, got {len(tags)}")
        resp = _ints(lines[i + 2], head + 2)
        if len(resp) != n:
            raise FormatError(head + 2, f"expected {n} responses, got {len(resp)}")
        if any(r not in (0, 1) for r in resp):
            raise FormatError(head + 2, "responses must be 0 or 1")
        raw.append((tags, resp, head))
        i += 3
    if vocab is None:
        vocab = {t: k + 1 for k, t in enumerate(sorted({t for tags, _, _ in raw for t in tags}))}
    seqs = []
    for idx, (tags, resp, head) in enumerate(raw):
        try:
            qs = [vocab[t] for t in tags]
        except KeyError as exc:
            raise FormatError(head + 1, f"exercise tag {exc.args[0]} not in vocabulary") from None
        seqs.append(StudentSequence(qs, resp, student_id=idx))
    return seqs, dict(vocab)


def serialize_triplet_format(seqs: Sequence[StudentSequence]) -> str:
    out = []
    for s in seqs:
        out.append(str(len(s)))
        out.append(",".join(str(int(q)) for q in s.questions))
        out.append(",".join(str(int(r)) for r in s.responses))
    return "\n".join(out) + "\n"


def read_triplet_file(path, vocab=None):
    with open(path) as fh:
        return parse_triplet_format(fh.read(), vocab)


def write_triplet_file(path, seqs) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_triplet_format(seqs))


def serialize_vocab(vocab: Dict[int, int]) -> str:
    rows = ["original_tag,dense_id"]
    rows += [f"{t},{d}" for t, d in sorted(vocab.items(), key=lambda kv: kv[1])]
    return "\n".join(rows) + "\n"


def parse_vocab(text: str) -> Dict[int, int]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    out = {}
    for ln in lines[1:]:
        t, d = ln.split(",")
        out[int(t)] = int(d)
    return out

"""Training loop, evaluation and repeated seeded runs for all three models."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import dkt, dkvmn, mann
from .checkpoint import Checkpoint
from .diffcore import OptimizerState, ParamRegistry, clip_global_norm, sgd_momentum_step
from .encoding import PaddedBatch, StudentSequence, pad_sequences
from .metrics import auc, lr_schedule, select_best_epoch

log = logging.getLogger(__name__)

MODELS = {"dkvmn": dkvmn, "mann": mann, "dkt": dkt}
DEFAULT_LR = {"dkvmn": 0.01, "mann": 0.01, "dkt": 0.05}


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    model: str = "dkvmn"
    d: int = 10
    n: int = 5
    batch: int = 32
    lr: Optional[float] = None
    epochs: int = 100
    patience: int = 20
    sigma: float = 0.05
    seed: int = 0
    seq_len: int = 200
    momentum: float = 0.9
    clip: float = 50.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model kind {self.model!r}; expected one of {sorted(MODELS)}")
        if self.lr is None:
            self.lr = DEFAULT_LR[self.model]
        for name in ("d", "n", "batch", "epochs", "patience", "seq_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr < 0 or self.sigma <= 0 or self.clip <= 0:
            raise ValueError("lr must be >= 0; sigma and clip must be > 0")

    @classmethod
    def field_types(cls) -> Dict[str, type]:
        return {f.name: f.type for f in fields(cls)}


@dataclass
class RunReport:
    train_loss: List[float] = field(default_factory=list)
    train_auc: List[float] = field(default_factory=list)
    valid_auc: List[float] = field(default_factory=list)
    best_epoch: int = -1
    test_auc: Optional[float] = None
    n_params: int = 0
    epoch_seconds: List[float] = field(default_factory=list, compare=False)

    def to_dict(self, timing: bool = False) -> dict:
        out = asdict(self)
        if not timing:
            out.pop("epoch_seconds")
        return out


def model_config(kind: str, n_questions: int, d: int, n: int):
    if kind == "dkvmn":
        return dkvmn.DkvmnConfig(n_questions, memory_size=n, d=d)
    if kind == "mann":
        return mann.MannConfig(n_questions, memory_size=n, d=d)
    if kind == "dkt":
        return dkt.DktConfig(n_questions, d=d)
    raise ValueError(f"unknown model kind {kind!r}")


def init_model(cfg: TrainConfig, n_questions: int, vocab=None) -> Checkpoint:
    mcfg = model_config(cfg.model, n_questions, cfg.d, cfg.n)
    params = MODELS[cfg.model].init_params(mcfg, seed=cfg.seed, sigma=cfg.sigma)
    return Checkpoint(cfg.model, mcfg.to_dict(), params, vocab)


def _loss_and_grad(kind, params, batch):
    return MODELS[kind].loss_and_grad(params, batch)


def _scores(kind, params, batch, raw=None):
    return MODELS[kind].score_points(params, batch, raw)


def _check_vocab(seqs: Sequence[StudentSequence], n_questions: int) -> None:
    top = max((int(s.questions.max()) for s in seqs), default=0)
    if top > n_questions:
        raise ValueError(f"exercise tag {top} exceeds model vocabulary of {n_questions}")


def score_dataset(ckpt: Checkpoint, data, seq_len: int = 200, chunk: int = 256):
    """Pooled (scores, labels) over all valid prediction points."""
    if isinstance(data, PaddedBatch):
        padded = data
    else:
        _check_vocab(data, ckpt.n_questions)
        padded = pad_sequences(data, seq_len, ckpt.n_questions)
    s_all, l_all = [], []
    for lo in range(0, len(padded), chunk):
        s, lab = _scores(ckpt.kind, ckpt.params, padded.take(slice(lo, lo + chunk)))
        s_all.append(s)
        l_all.append(lab)
    return np.concatenate(s_all), np.concatenate(l_all)


def evaluate(ckpt: Checkpoint, seqs, seq_len: int = 200):
    """Return ``(test_auc, scores, labels)``."""
    scores, labels = score_dataset(ckpt, seqs, seq_len)
    return auc(scores, labels), scores, labels


def train(
    cfg: TrainConfig,
    train_seqs: Sequence[StudentSequence],
    valid_seqs: Sequence[StudentSequence],
    n_questions: int,
    vocab=None,
    callback=None,
):
    """Train one model; returns ``(best_checkpoint, RunReport)``.

    ``callback(epoch, params, report)``, if given, runs after every epoch.
    """
    _check_vocab(list(train_seqs) + list(valid_seqs), n_questions)
    ckpt = init_model(cfg, n_questions, vocab)
    params: ParamRegistry = ckpt.params
    opt = OptimizerState(momentum=cfg.momentum, clip=cfg.clip)
    train_pad = pad_sequences(train_seqs, cfg.seq_len, n_questions)
    valid_pad = pad_sequences(valid_seqs, cfg.seq_len, n_questions)
    shuffle_rng = np.random.default_rng([cfg.seed, 7])
    report = RunReport(n_params=params.num_params())
    best = params.copy()
    for epoch in range(cfg.epochs):
        tic = time.perf_counter()
        lr = lr_schedule(cfg.lr, epoch)
        order = shuffle_rng.permutation(len(train_pad))
        total_loss = 0.0
        s_all, l_all = [], []
        for b, lo in enumerate(range(0, len(order), cfg.batch)):
            batch = train_pad.take(order[lo : lo + cfg.batch])
            loss, grads, raw = _loss_and_grad(cfg.model, params, batch)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDiverged(f"non-finite loss or gradient at epoch {epoch}, batch {b}")
            s, lab = _scores(cfg.model, params, batch, raw)
            s_all.append(s)
            l_all.append(lab)
            total_loss += loss
            params.set_grads(clip_global_norm(grads, cfg.clip))
            sgd_momentum_step(params, opt, lr)
        scores = np.concatenate(s_all)
        labels = np.concatenate(l_all)
        report.train_loss.append(total_loss / max(labels.size, 1))
        report.train_auc.append(auc(scores, labels))
        report.valid_auc.append(evaluate(ckpt, valid_pad)[0])
        report.epoch_seconds.append(time.perf_counter() - tic)
        best_epoch = select_best_epoch(report.valid_auc)
        if best_epoch == epoch:
            best = params.copy()
        log.info(
            "%s epoch %d lr %.4g loss %.4f train auc %.4f valid auc %.4f",
            cfg.model, epoch, lr, report.train_loss[-1], report.train_auc[-1], report.valid_auc[-1],
        )
        if callback is not None:
            callback(epoch, params, report)
        if epoch - best_epoch >= cfg.patience:
            break
    report.best_epoch = select_best_epoch(report.valid_auc)
    return Checkpoint(cfg.model, ckpt.config, best, vocab, {"train": asdict(cfg)}), report


def run(cfg: TrainConfig, train_seqs, valid_seqs, test_seqs, n_questions: int, vocab=None):
    """Train then score the best checkpoint on ``test_seqs``."""
    ckpt, report = train(cfg, train_seqs, valid_seqs, n_questions, vocab)
    report.test_auc = evaluate(ckpt, test_seqs, cfg.seq_len)[0]
    return ckpt, report


@dataclass
class RepeatedRuns:
    test_aucs: List[float]
    reports: List[RunReport]
    failures: Dict[int, str]

    @property
    def mean(self) -> float:
        return float(np.mean(self.test_aucs)) if self.test_aucs else float("nan")

    @property
    def std(self) -> float:
        return sample_std(self.test_aucs)

    def formatted(self) -> str:
        return format_mean_std(self.test_aucs)


def sample_std(values: Sequence[float]) -> float:
    if len(values) < 2:
        return float("nan")
    return float(np.std(np.asarray(values, dtype=float), ddof=1))


def format_mean_std(values: Sequence[float]) -> str:
    """Percent ``mean±std`` with one decimal, e.g. ``82.7±0.1``."""
    return f"{100 * float(np.mean(values)):.1f}±{100 * sample_std(values):.1f}"


def repeated_runs(cfg: TrainConfig, seeds: Sequence[int], train_seqs, valid_seqs, test_seqs, n_questions: int):
    if len(seeds) < 2:
        raise ValueError("repeated runs need at least two seeds")
    aucs, reports, failures = [], [], {}
    for seed in seeds:
        run_cfg = TrainConfig(**{**asdict(cfg), "seed": int(seed)})
        try:
            _, report = run(run_cfg, train_seqs, valid_seqs, test_seqs, n_questions)
        except TrainingDiverged as exc:
            failures[int(seed)] = str(exc)
            continue
        aucs.append(report.test_auc)
        reports.append(report)
    return RepeatedRuns(aucs, reports, failures)


def serialize_curve(report: RunReport) -> str:
    rows = ["epoch,train_loss,train_auc,valid_auc"]
    for e, (lo, ta, va) in enumerate(zip(report.train_loss, report.train_auc, report.valid_auc)):
        rows.append(f"{e},{float(lo)!r},{float(ta)!r},{float(va)!r}")
    return "\n".join(rows) + "\n"


GRADCHECK_TOL = 1e-4
TINY = {"n_questions": 5, "n": 3, "d": 4, "T": 6}


def tiny_problem(kind: str, seed: int = 0, sigma: float = 0.5):
    """Small model and batch used for gradient verification.

    ``sigma`` is larger than the training default so that no gradient is so
    small that finite differences drown in rounding error.
    """
    from .encoding import pad_sequences

    rng = np.random.default_rng(seed)
    Q, T = TINY["n_questions"], TINY["T"]
    seqs = [StudentSequence(rng.integers(1, Q + 1, T), rng.integers(0, 2, T)) for _ in range(3)]
    seqs.append(StudentSequence(rng.integers(1, Q + 1, 4), rng.integers(0, 2, 4)))
    batch = pad_sequences(seqs, T, Q)
    mcfg = model_config(kind, Q, TINY["d"], TINY["n"])
    params = MODELS[kind].init_params(mcfg, seed=seed, sigma=sigma)
    if kind == "mann":
        params["alpha"][0] = rng.normal()
        params["beta"][0] = rng.normal()
    return params, batch


def gradcheck_model(kind: str, seed: int = 0):
    from .diffcore import finite_diff_gradcheck

    params, batch = tiny_problem(kind, seed)
    return finite_diff_gradcheck(
        lambda reg: MODELS[kind].loss_and_grad(reg, batch)[:2], params, max_coords=None
    )

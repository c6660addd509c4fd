"""Command-line entry point: ``knowtrace {synth,train,eval,discover,trace,gradcheck}``.

Every option can also come from a ``key = value`` config file passed with
``--config``; keys are the long option names with dashes replaced by
underscores.  Command-line values win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import analysis, synthgen, trainer
from .checkpoint import load_checkpoint, save_checkpoint
from .encoding import read_triplet_file, serialize_vocab, split_dataset, split_train_valid

log = logging.getLogger("knowtrace")


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def read_config_file(path) -> dict:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliError(f"{path}:{n}: expected 'key = value'")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def _apply_config(parser: argparse.ArgumentParser, args: argparse.Namespace, argv) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    given = {a.split("=", 1)[0] for a in argv if a.startswith("--")}
    known = {a.dest: a for a in parser._actions}
    for key, raw in read_config_file(args.config).items():
        if key not in known or key in ("config", "help", "_required"):
            raise CliError(f"unknown config key {key!r}")
        action = known[key]
        if any(opt in given for opt in action.option_strings):
            continue
        value = action.type(raw) if action.type else raw
        setattr(args, key, value)
    return args


def _train_config(args, seed=None) -> trainer.TrainConfig:
    return trainer.TrainConfig(
        model=args.model,
        d=args.d,
        n=args.n,
        batch=args.batch,
        lr=args.lr,
        epochs=args.epochs,
        patience=args.patience,
        sigma=args.sigma,
        seed=args.seed if seed is None else seed,
        seq_len=args.seq_len,
    )


# ---------------------------------------------------------------------------
# datasets
# ---------------------------------------------------------------------------


def _load_dataset(path, split_seed: int):
    """Return (train, valid, test, vocab).

    A directory must hold ``train.txt`` and ``test.txt``; a single file is
    split 70/30 into train/test.  Validation is 20% of train either way.
    """
    if not os.path.exists(path):
        raise CliError(f"dataset not found: {path}")
    if os.path.isdir(path):
        train_all, vocab = read_triplet_file(os.path.join(path, "train.txt"))
        test, _ = read_triplet_file(os.path.join(path, "test.txt"), vocab)
        train, valid = split_train_valid(train_all, 0.2, seed=split_seed)
    else:
        seqs, vocab = read_triplet_file(path)
        train, valid, test = split_dataset(seqs, 0.3, 0.2, seed=split_seed)
    return train, valid, test, vocab


def _eval_sequences(path, vocab):
    if os.path.isdir(path):
        path = os.path.join(path, "test.txt")
    if not os.path.exists(path):
        raise CliError(f"dataset not found: {path}")
    try:
        seqs, _ = read_triplet_file(path, vocab)
    except ValueError as exc:
        raise CliError(f"dataset does not match the checkpoint vocabulary: {exc}") from None
    return seqs


def _ckpt_vocab(ckpt):
    if ckpt.vocab is not None:
        return ckpt.vocab
    return {q: q for q in range(1, ckpt.n_questions + 1)}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.full_scale:
        cfg = synthgen.SynthConfig.full_scale(seed=args.seed)
    else:
        cfg = synthgen.SynthConfig(
            n_train=args.train_students,
            n_test=args.test_students,
            n_exercises=args.exercises,
            n_concepts=args.concepts,
            seq_len=args.length,
            guess=args.guess,
            learn_rate=args.learn_rate,
            seed=args.seed,
        )
    ds = synthgen.generate(cfg)
    try:
        summary = synthgen.write_dataset(ds, args.out)
    except OSError as exc:
        raise CliError(f"cannot write to {args.out}: {exc}") from None
    print(
        f"students: {summary['students']:,}  exercise tags: {summary['exercise_tags']:,}  "
        f"records: {summary['records']:,}"
    )
    return 0


def _write_run(out_dir, ckpt, report, vocab) -> None:
    os.makedirs(out_dir, exist_ok=True)
    save_checkpoint(os.path.join(out_dir, "checkpoint.npz"), ckpt)
    with open(os.path.join(out_dir, "curve.csv"), "w") as fh:
        fh.write(trainer.serialize_curve(report))
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "vocab.csv"), "w") as fh:
        fh.write(serialize_vocab(vocab))


def _print_report(report, init_params, ckpt) -> None:
    delta = max(float(np.max(np.abs(ckpt.params[k] - init_params[k]))) for k in ckpt.params)
    print(
        f"best epoch: {report.best_epoch}  valid AUC: {report.valid_auc[report.best_epoch]:.4f}  "
        f"test AUC: {report.test_auc:.4f}  parameters: {report.n_params}  max |change|: {delta:.6g}"
    )
    if report.epoch_seconds:
        print(f"seconds per epoch: {np.mean(report.epoch_seconds):.3f}")


def cmd_train(args) -> int:
    train, valid, test, vocab = _load_dataset(args.dataset, args.split_seed)
    Q = len(vocab)
    seeds = [args.seed + i for i in range(args.seeds)]
    failures = 0
    aucs = []
    for seed in seeds:
        cfg = _train_config(args, seed)
        init = trainer.init_model(cfg, Q).params
        try:
            ckpt, report = trainer.run(cfg, train, valid, test, Q, vocab)
        except trainer.TrainingDiverged as exc:
            print(f"seed {seed}: diverged: {exc}", file=sys.stderr)
            failures += 1
            continue
        out = args.out if len(seeds) == 1 else os.path.join(args.out, f"seed_{seed}")
        _write_run(out, ckpt, report, vocab)
        if len(seeds) > 1:
            print(f"seed {seed}: ", end="")
        _print_report(report, init, ckpt)
        aucs.append(report.test_auc)
    if len(seeds) > 1 and len(aucs) >= 2:
        line = trainer.format_mean_std(aucs)
        print(f"{args.model} test AUC (%): {line}  (mean {np.mean(aucs):.4f}, std {trainer.sample_std(aucs):.4f})")
    return 1 if failures else 0


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    seqs = _eval_sequences(args.dataset, _ckpt_vocab(ckpt))
    try:
        value, _, _ = trainer.evaluate(ckpt, seqs, args.seq_len)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    print(f"test AUC: {value:.4f}")
    return 0


def cmd_discover(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    truth = None
    if args.ground_truth:
        with open(args.ground_truth) as fh:
            truth = synthgen.parse_ground_truth(fh.read())
    try:
        rep = analysis.discover_concepts(ckpt, truth)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "weights.csv"), "w") as fh:
        fh.write(analysis.serialize_weights(rep))
    with open(os.path.join(args.out, "clusters.csv"), "w") as fh:
        fh.write(analysis.serialize_clusters(rep))
    print(f"nonempty clusters: {rep.n_clusters}  mean max weight: {float(np.mean(rep.max_weight)):.4f}")
    if rep.ami is not None:
        print(f"AMI vs ground truth: {rep.ami:.4f}")
    return 0


def cmd_trace(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    if ckpt.kind != "dkvmn":
        raise CliError(f"trace needs a dkvmn checkpoint, got {ckpt.kind!r}")
    seqs = _eval_sequences(args.dataset, _ckpt_vocab(ckpt))
    if not 0 <= args.student < len(seqs):
        raise CliError(f"student index {args.student} out of range [0, {len(seqs)})")
    tr = analysis.trace_knowledge_state(ckpt, seqs[args.student])
    path = args.out
    if os.path.isdir(path):
        path = os.path.join(path, f"trace_{args.student}.csv")
    with open(path, "w") as fh:
        fh.write(analysis.serialize_trace(tr))
    print(f"wrote {len(tr)} rows x {tr.states.shape[1]} concepts to {path}")
    return 0


def cmd_gradcheck(args) -> int:
    rep = trainer.gradcheck_model(args.model, seed=args.seed)
    ok = rep.passed(trainer.GRADCHECK_TOL)
    print(f"{args.model} gradcheck: {'PASS' if ok else 'FAIL'}  max relative error: {rep.worst:.3e}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="knowtrace", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def need(sp, flag, **kw):
        # checked after the config file is merged, so the file may supply it
        act = sp.add_argument(flag, **kw)
        sp.set_defaults(_required=sp.get_default("_required") + [act.dest])
        return act

    def common(sp):
        sp.set_defaults(_required=[])
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    s = common(sub.add_parser("synth", help="generate a synthetic dataset"))
    need(s, "--out")
    s.add_argument("--train-students", type=int, default=400)
    s.add_argument("--test-students", type=int, default=400)
    s.add_argument("--exercises", type=int, default=50)
    s.add_argument("--concepts", type=int, default=5)
    s.add_argument("--length", type=int, default=50)
    s.add_argument("--guess", type=float, default=0.25)
    s.add_argument("--learn-rate", type=float, default=0.1)
    s.add_argument("--full-scale", action="store_true", help="2000 + 2000 students")
    s.set_defaults(func=cmd_synth)

    t = common(sub.add_parser("train", help="train a model"))
    t.add_argument("--model", choices=sorted(trainer.MODELS), default="dkvmn")
    need(t, "--dataset")
    need(t, "--out")
    t.add_argument("--d", type=int, default=10)
    t.add_argument("--n", type=int, default=5)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch", type=int, default=32)
    t.add_argument("--epochs", type=int, default=100)
    t.add_argument("--patience", type=int, default=20)
    t.add_argument("--sigma", type=float, default=0.05)
    t.add_argument("--seeds", type=int, default=1)
    t.add_argument("--seq-len", type=int, default=200)
    t.add_argument("--split-seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    e = common(sub.add_parser("eval", help="test AUC of a checkpoint"))
    need(e, "--checkpoint")
    need(e, "--dataset")
    e.add_argument("--seq-len", type=int, default=200)
    e.set_defaults(func=cmd_eval)

    d = common(sub.add_parser("discover", help="concept discovery from a dkvmn checkpoint"))
    need(d, "--checkpoint")
    d.add_argument("--ground-truth")
    need(d, "--out")
    d.set_defaults(func=cmd_discover)

    r = common(sub.add_parser("trace", help="knowledge-state trace of one student"))
    need(r, "--checkpoint")
    need(r, "--dataset")
    need(r, "--student", type=int)
    need(r, "--out")
    r.set_defaults(func=cmd_trace)

    g = common(sub.add_parser("gradcheck", help="finite-difference check on a tiny model"))
    g.add_argument("--model", choices=sorted(trainer.MODELS), default="dkvmn")
    g.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    try:
        args = _apply_config(sub, args, argv)
        missing = [f"--{d.replace('_', '-')}" for d in args._required if getattr(args, d) is None]
        if missing:
            raise CliError(f"missing required option(s): {', '.join(missing)}")
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

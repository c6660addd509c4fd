"""
Memory network against MANN and DKT
===================================

Same data and budget for all three models, five seeds each, reported as
mean±std percent alongside the parameter count.
"""

from knowtrace import synthgen, trainer
from knowtrace.encoding import split_train_valid

ds = synthgen.generate(synthgen.SynthConfig(seed=0))
train, valid = split_train_valid(ds.train, 0.2, seed=0)

print(f"{'model':<6} {'test AUC (%)':>12} {'params':>7}")
for model in ("dkvmn", "mann", "dkt"):
    cfg = trainer.TrainConfig(model=model, d=10, n=5, epochs=50, seq_len=50)
    rr = trainer.repeated_runs(cfg, range(5), train, valid, ds.test, 50)
    print(f"{model:<6} {rr.formatted():>12} {rr.reports[0].n_params:>7}")

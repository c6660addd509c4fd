"""
Train on synthetic students and look for concepts
=================================================

Desk-scale data: 400 train and 400 test students, 50 exercises drawn from
5 hidden concepts.  Train the memory network, report test AUC, then cluster
exercises by their strongest concept key.
"""

import numpy as np

from knowtrace import analysis, synthgen, trainer
from knowtrace.encoding import split_train_valid

ds = synthgen.generate(synthgen.SynthConfig(seed=0))
train, valid = split_train_valid(ds.train, 0.2, seed=0)
print(synthgen.dataset_summary(ds))

cfg = trainer.TrainConfig(model="dkvmn", d=10, n=5, epochs=50, seq_len=50, seed=0)
ckpt, report = trainer.run(cfg, train, valid, ds.test, n_questions=50)

for e in range(0, len(report.valid_auc), 5):
    print(f"epoch {e:3d}  loss {report.train_loss[e]:.4f}  valid AUC {report.valid_auc[e]:.4f}")
print("best epoch", report.best_epoch, "test AUC", round(report.test_auc, 4))

rep = analysis.discover_concepts(ckpt, ds.truth)
print("nonempty clusters:", rep.n_clusters, " AMI:", round(rep.ami, 3))
print("mean max attention weight:", round(float(np.mean(rep.max_weight)), 3))

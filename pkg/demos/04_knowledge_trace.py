"""
Following one student's concept states
======================================

After training, each value slot is read on its own to give a per-concept
mastery probability.  Print how those move as the student works through
the first exercises.
"""

import numpy as np

from knowtrace import analysis, synthgen, trainer
from knowtrace.encoding import split_train_valid

ds = synthgen.generate(synthgen.SynthConfig(seed=0))
train, valid = split_train_valid(ds.train, 0.2, seed=0)
ckpt, _ = trainer.train(trainer.TrainConfig(epochs=30, seq_len=50), train, valid, 50)

student = ds.test[0]
trace = analysis.trace_knowledge_state(ckpt, student)
clusters = analysis.discover_concepts(ckpt).clusters

print("step  ex  resp  concept  " + "  ".join(f"c{i + 1}" for i in range(trace.states.shape[1])))
print("   0                    " + " ".join(f"{s:.2f}" for s in trace.states[0]))
for t in range(12):
    q, r = int(trace.questions[t]), int(trace.responses[t])
    row = " ".join(f"{s:.2f}" for s in trace.states[t + 1])
    print(f"{t + 1:4d}  {q:2d}  {r:4d}  {clusters[q - 1]:7d}  {row}")

share = analysis.correct_answer_raise_fraction(ckpt, [analysis.trace_knowledge_state(ckpt, s) for s in ds.test[:50]])
print("correct answers that raised their concept's state:", round(share, 3))

"""
One step of the key-value memory, by hand
=========================================

Attend over concept keys, read a mastery summary, predict, then write the
student's answer back into the value slots.
"""

import numpy as np

from knowtrace import dkvmn

np.set_printoptions(precision=4, suppress=True)

cfg = dkvmn.DkvmnConfig(n_questions=4, memory_size=3, d=2)
params = dkvmn.init_params(cfg, seed=1, sigma=0.5)

# exercise 2 is embedded and compared with each concept key
k = params["A"][2 - 1]
w = dkvmn.correlation_weight(k, params["Mk"])
print("attention over concepts:", w, "sum", w.sum())

# the read is a weighted mix of the value slots
Mv = params["Mv0"].copy()
r = dkvmn.read(Mv, w)
f, p = dkvmn.predict(params, r, k)
print("P(correct on exercise 2):", round(float(p), 4))

# the student answers correctly: value index is q + r*Q
v = params["B"][2 + 1 * cfg.n_questions - 1]
Mv_next = dkvmn.write(params, Mv, w, v)
print("slot change:\n", Mv_next - Mv)

# mastery per concept before and after
print("mastery before:", dkvmn.depict_knowledge_state(params, Mv))
print("mastery after: ", dkvmn.depict_knowledge_state(params, Mv_next))

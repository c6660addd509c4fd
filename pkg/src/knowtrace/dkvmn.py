"""Dynamic key-value memory network for knowledge tracing.

A static key matrix ``Mk`` (N x d_k) holds one embedding per latent concept;
a per-student value matrix ``Mv`` (N x d_v) holds the concept states.  At each
step the exercise embedding attends over the keys, the value matrix is read to
predict the response to the *current* exercise, and the (exercise, response)
embedding is then written back with an erase-then-add update.

Parameter layout (dense weights are stored ``(d_in, d_out)``)::

    A    (Q, d_k)       exercise embedding, row q-1 for tag q
    B    (2Q, d_v)      interaction embedding, row x-1 for x = q + r*Q
    Mk   (N, d_k)       key matrix
    Mv0  (N, d_v)       initial value matrix
    W1   (d_v+d_k, d_f), b1 (d_f,)
    W2   (d_f, 1),       b2 (1,)
    E    (d_v, d_v),     be (d_v,)     erase
    D    (d_v, d_v),     ba (d_v,)     add
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .diffcore import (
    ParamRegistry,
    activate_backward,
    affine,
    affine_backward,
    binary_cross_entropy,
    binary_cross_entropy_grad,
    sigmoid,
    softmax,
    softmax_backward,
    tanh,
)
from .encoding import PaddedBatch

KIND = "dkvmn"


@dataclass
class DkvmnConfig:
    n_questions: int
    memory_size: int = 5
    d: int = 10
    d_k: Optional[int] = None
    d_v: Optional[int] = None
    d_f: Optional[int] = None

    def __post_init__(self):
        self.d_k = self.d_k or self.d
        self.d_v = self.d_v or self.d
        self.d_f = self.d_f or self.d_k
        for name in ("n_questions", "memory_size", "d", "d_k", "d_v", "d_f"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_dict(self):
        return asdict(self)


def init_params(cfg: DkvmnConfig, seed: int = 0, sigma: float = 0.05) -> ParamRegistry:
    rng = np.random.default_rng(seed)
    Q, N, dk, dv, df = cfg.n_questions, cfg.memory_size, cfg.d_k, cfg.d_v, cfg.d_f

    def g(*shape):
        return rng.normal(0.0, sigma, size=shape)

    reg = ParamRegistry()
    reg.add("A", g(Q, dk))
    reg.add("B", g(2 * Q, dv))
    reg.add("Mk", g(N, dk))
    reg.add("Mv0", g(N, dv))
    reg.add("W1", g(dv + dk, df))
    reg.add("b1", np.zeros(df))
    reg.add("W2", g(df, 1))
    reg.add("b2", np.zeros(1))
    reg.add("E", g(dv, dv))
    reg.add("be", np.zeros(dv))
    reg.add("D", g(dv, dv))
    reg.add("ba", np.zeros(dv))
    return reg


# ---------------------------------------------------------------------------
# single-step operations (batch dims allowed in front)
# ---------------------------------------------------------------------------


def correlation_weight(k, Mk):
    """Softmax over concepts of the inner products ``k . Mk(i)``."""
    return softmax(k @ Mk.T)


def read(Mv, w):
    """Weighted sum of value slots: ``sum_i w(i) Mv(i)``."""
    return np.einsum("...n,...nd->...d", w, Mv)


def predict(params, r, k):
    """Return (f, p): the summary vector and the probability of a correct answer."""
    f = tanh(affine(np.concatenate([r, k], axis=-1), params["W1"], params["b1"]))
    p = sigmoid(affine(f, params["W2"], params["b2"]))[..., 0]
    return f, p


def erase_add(params, v):
    e = sigmoid(affine(v, params["E"], params["be"]))
    a = tanh(affine(v, params["D"], params["ba"]))
    return e, a


def apply_write(Mv, w, e, a):
    """Erase then add: ``M(i) * (1 - w(i) e) + w(i) a`` for every slot."""
    w3 = w[..., :, None]
    return Mv * (1.0 - w3 * e[..., None, :]) + w3 * a[..., None, :]


def write(params, Mv, w, v):
    e, a = erase_add(params, v)
    return apply_write(Mv, w, e, a)


# ---------------------------------------------------------------------------
# sequence forward / backward
# ---------------------------------------------------------------------------


def forward(params: ParamRegistry, batch: PaddedBatch, keep_cache: bool = False):
    """Run the memory over a padded batch.

    Returns ``(p, loss, cache)`` where ``p`` is (B, T) with zeros at padded
    positions and ``loss`` is the summed cross entropy over valid positions.
    """
    A, Bm, Mk = params["A"], params["B"], params["Mk"]
    nB, T = batch.keys.shape
    Mv = np.broadcast_to(params["Mv0"], (nB,) + params["Mv0"].shape).copy()
    mask = batch.mask
    maskf = mask.astype(float)
    qi = np.maximum(batch.keys - 1, 0)
    xi = np.maximum(batch.values - 1, 0)
    probs = np.zeros((nB, T))
    steps = [] if keep_cache else None
    for t in range(T):
        if not mask[:, t].any():
            break
        k = A[qi[:, t]]
        w = correlation_weight(k, Mk)
        r = read(Mv, w)
        f, p = predict(params, r, k)
        v = Bm[xi[:, t]]
        e, a = erase_add(params, v)
        ww = w * maskf[:, t, None]
        Mv_next = apply_write(Mv, ww, e, a)
        probs[:, t] = p * maskf[:, t]
        if keep_cache:
            steps.append((k, w, Mv, r, f, p, v, e, a, ww))
        Mv = Mv_next
    valid_p = probs[mask]
    loss = float(binary_cross_entropy(valid_p, batch.responses[mask]).sum())
    cache = {"steps": steps, "final_memory": Mv}
    return probs, loss, cache


def backward(params: ParamRegistry, batch: PaddedBatch, cache) -> dict:
    """Gradients of the summed loss w.r.t. every parameter."""
    grads = {name: np.zeros_like(params[name]) for name in params}
    W1, W2, E, D, Mk = params["W1"], params["W2"], params["E"], params["D"], params["Mk"]
    dv_dim = params["Mv0"].shape[1]
    steps = cache["steps"]
    maskf = batch.mask.astype(float)
    qi = np.maximum(batch.keys - 1, 0)
    xi = np.maximum(batch.values - 1, 0)
    dMv = np.zeros_like(cache["final_memory"])
    for t in range(len(steps) - 1, -1, -1):
        k, w, Mv, r, f, p, v, e, a, ww = steps[t]
        m = maskf[:, t]
        # write: Mv_next = Mv * (1 - ww e) + ww a
        ww3 = ww[:, :, None]
        d_ww = np.einsum("bnd,bnd->bn", dMv, a[:, None, :] - Mv * e[:, None, :])
        de = -np.einsum("bnd,bnd,bn->bd", dMv, Mv, ww)
        da = np.einsum("bnd,bn->bd", dMv, ww)
        dMv = dMv * (1.0 - ww3 * e[:, None, :])
        dw = d_ww * m[:, None]
        dv_e, dE, dbe = affine_backward(activate_backward("sigmoid", de, e), v, E)
        dv_a, dD, dba = affine_backward(activate_backward("tanh", da, a), v, D)
        grads["E"] += dE
        grads["be"] += dbe
        grads["D"] += dD
        grads["ba"] += dba
        np.add.at(grads["B"], xi[:, t], dv_e + dv_a)
        # predict
        dp = binary_cross_entropy_grad(p, batch.responses[:, t]) * m
        dz = activate_backward("sigmoid", dp, p)[:, None]
        df, dW2, db2 = affine_backward(dz, f, W2)
        grads["W2"] += dW2
        grads["b2"] += db2
        h = np.concatenate([r, k], axis=-1)
        dh, dW1, db1 = affine_backward(activate_backward("tanh", df, f), h, W1)
        grads["W1"] += dW1
        grads["b1"] += db1
        dr, dk = dh[:, :dv_dim], dh[:, dv_dim:]
        # read
        dw = dw + np.einsum("bd,bnd->bn", dr, Mv)
        dMv = dMv + w[:, :, None] * dr[:, None, :]
        # attention
        dlogits = softmax_backward(dw, w)
        dk = dk + dlogits @ Mk
        grads["Mk"] += dlogits.T @ k
        np.add.at(grads["A"], qi[:, t], dk)
    grads["Mv0"] += dMv.sum(axis=0)
    return grads


def loss_and_grad(params: ParamRegistry, batch: PaddedBatch):
    probs, loss, cache = forward(params, batch, keep_cache=True)
    grads = backward(params, batch, cache)
    return loss, grads, probs


def score_points(params: ParamRegistry, batch: PaddedBatch, probs=None):
    """(scores, labels) at every valid interaction; the model predicts the current response."""
    if probs is None:
        probs, _, _ = forward(params, batch)
    return probs[batch.mask], batch.responses[batch.mask]


def forward_sequence(params: ParamRegistry, row: PaddedBatch):
    """Prediction trace and loss for a single padded row."""
    probs, loss, _ = forward(params, row)
    return probs[0][row.mask[0]], loss


# ---------------------------------------------------------------------------
# inspection
# ---------------------------------------------------------------------------


def depict_knowledge_state(params: ParamRegistry, Mv) -> np.ndarray:
    """Mastery probability per concept.

    Each value slot is read on its own (one-hot attention) and the
    exercise-embedding half of ``W1`` is masked out.
    """
    dv = params["Mv0"].shape[1]
    W1r = params["W1"][:dv]
    f = tanh(Mv @ W1r + params["b1"])
    return sigmoid(affine(f, params["W2"], params["b2"]))[..., 0]


def correlation_weight_matrix(params: ParamRegistry) -> np.ndarray:
    """Q x N matrix; row q-1 is the concept attention of exercise q."""
    return correlation_weight(params["A"], params["Mk"])


def memory_trajectory(params: ParamRegistry, questions, responses):
    """Value matrices before any interaction and after each write (L+1 of them)."""
    Q = params["A"].shape[0]
    Mv = params["Mv0"].copy()
    out = [Mv.copy()]
    for q, r in zip(questions, responses):
        k = params["A"][int(q) - 1]
        w = correlation_weight(k, params["Mk"])
        v = params["B"][int(q) + int(r) * Q - 1]
        Mv = write(params, Mv, w, v)
        out.append(Mv.copy())
    return out

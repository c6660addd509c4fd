"""LSTM deep-knowledge-tracing baseline.

The one-hot interaction ``x = q + r*Q`` enters a single-layer LSTM through a
row lookup; gate pre-activations are packed as ``[input, forget, output,
candidate]`` along the last axis.  ``y_t = sigmoid(Wy^T h_t + by)`` gives one
probability per exercise for the next step.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .diffcore import (
    ParamRegistry,
    affine,
    affine_backward,
    binary_cross_entropy,
    binary_cross_entropy_grad,
    sigmoid,
    tanh,
)
from .encoding import PaddedBatch

KIND = "dkt"


@dataclass
class DktConfig:
    n_questions: int
    d: int = 10  # hidden size

    def __post_init__(self):
        if self.n_questions < 1 or self.d < 1:
            raise ValueError("n_questions and d must be positive")

    def to_dict(self):
        return asdict(self)


def init_params(cfg: DktConfig, seed: int = 0, sigma: float = 0.05) -> ParamRegistry:
    rng = np.random.default_rng(seed)
    Q, H = cfg.n_questions, cfg.d
    b = np.zeros(4 * H)
    b[H : 2 * H] = 1.0  # forget gate
    reg = ParamRegistry()
    reg.add("Wx", rng.normal(0.0, sigma, size=(2 * Q, 4 * H)))
    reg.add("Wh", rng.normal(0.0, sigma, size=(H, 4 * H)))
    reg.add("b", b)
    reg.add("Wy", rng.normal(0.0, sigma, size=(H, Q)))
    reg.add("by", np.zeros(Q))
    return reg


def lstm_step(params, h, c, x):
    """Advance the LSTM on joint indices ``x`` (1-based, batch of them).

    Returns ``(y, h_next, c_next, gates)``; ``gates`` = (i, f, o, g).
    """
    H = h.shape[-1]
    z = params["Wx"][np.maximum(np.asarray(x) - 1, 0)] + h @ params["Wh"] + params["b"]
    i = sigmoid(z[..., :H])
    f = sigmoid(z[..., H : 2 * H])
    o = sigmoid(z[..., 2 * H : 3 * H])
    g = tanh(z[..., 3 * H :])
    c_next = f * c + i * g
    h_next = o * tanh(c_next)
    y = sigmoid(affine(h_next, params["Wy"], params["by"]))
    return y, h_next, c_next, (i, f, o, g)


def _targets(batch: PaddedBatch):
    valid = batch.mask[:, :-1] & batch.mask[:, 1:]
    return valid, np.maximum(batch.keys[:, 1:] - 1, 0), batch.responses[:, 1:]


def forward(params: ParamRegistry, batch: PaddedBatch, keep_cache: bool = False):
    nB, T = batch.keys.shape
    H = params["Wh"].shape[0]
    h = np.zeros((nB, H))
    c = np.zeros((nB, H))
    valid, q_next, r_next = _targets(batch)
    rows = np.arange(nB)
    scores = np.zeros((nB, max(T - 1, 0)))
    steps = [] if keep_cache else None
    for t in range(T - 1):
        if not valid[:, t].any():
            break
        y, h_next, c_next, gates = lstm_step(params, h, c, batch.values[:, t])
        scores[:, t] = y[rows, q_next[:, t]] * valid[:, t]
        if keep_cache:
            steps.append((h, c, h_next, c_next, gates, y))
        h, c = h_next, c_next
    loss = float(binary_cross_entropy(scores[valid], r_next[valid]).sum()) if T > 1 else 0.0
    return scores, loss, {"steps": steps}


def backward(params: ParamRegistry, batch: PaddedBatch, cache) -> dict:
    grads = {name: np.zeros_like(params[name]) for name in params}
    Wh, Wy = params["Wh"], params["Wy"]
    H = Wh.shape[0]
    valid, q_next, r_next = _targets(batch)
    steps = cache["steps"]
    nB = batch.keys.shape[0]
    rows = np.arange(nB)
    xi = np.maximum(batch.values - 1, 0)
    dh_next = np.zeros((nB, H))
    dc_next = np.zeros((nB, H))
    for t in range(len(steps) - 1, -1, -1):
        h_prev, c_prev, h, c, (i, f, o, g), y = steps[t]
        sel = y[rows, q_next[:, t]]
        dsel = binary_cross_entropy_grad(sel, r_next[:, t]) * valid[:, t]
        dlogits = np.zeros_like(y)
        dlogits[rows, q_next[:, t]] = dsel * sel * (1.0 - sel)
        dh, dWy, dby = affine_backward(dlogits, h, Wy)
        grads["Wy"] += dWy
        grads["by"] += dby
        dh = dh + dh_next
        tc = np.tanh(c)
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c_prev * f * (1.0 - f),
                do * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ],
            axis=-1,
        )
        np.add.at(grads["Wx"], xi[:, t], dz)
        grads["Wh"] += h_prev.T @ dz
        grads["b"] += dz.sum(axis=0)
        dh_next = dz @ Wh.T
        dc_next = dc * f
    return grads


def loss_and_grad(params: ParamRegistry, batch: PaddedBatch):
    scores, loss, cache = forward(params, batch, keep_cache=True)
    return loss, backward(params, batch, cache), scores


def score_points(params: ParamRegistry, batch: PaddedBatch, scores=None):
    if scores is None:
        scores, _, _ = forward(params, batch)
    valid, _, r_next = _targets(batch)
    return scores[valid], r_next[valid]


def dkt_sequence_loss(params: ParamRegistry, row: PaddedBatch) -> float:
    return forward(params, row)[1]

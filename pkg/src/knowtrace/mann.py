"""Single-matrix memory-augmented baseline.

The joint (exercise, response) embedding ``v_t`` is both the read key and the
write content.  Reads use cosine-similarity attention sharpened by a learned
positive key strength; writes use least-recently-used access (LRUA): a gated
mix of the previous read weight and the previous least-used indicator.  The
read content is mapped to one probability per exercise, interpreted as the
chance of answering that exercise correctly at the next step.

Parameters::

    emb      (2Q, M)    joint embedding, row x-1 for x = q + r*Q
    M0       (N, M)     initial memory
    beta     (1,)       key strength pre-activation, softplus(beta) + 1e-6
    alpha    (1,)       write gate pre-activation
    E, be / D, ba       erase / add transforms (M x M)
    Wo (M, Q), bo (Q,)  output layer
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

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
    softplus,
    tanh,
)
from .encoding import PaddedBatch

KIND = "mann"
USAGE_DECAY = 0.9
COSINE_EPS = 1e-8
BETA_FLOOR = 1e-6


@dataclass
class MannConfig:
    n_questions: int
    memory_size: int = 5
    d: int = 10
    n_reads: int = 1

    def __post_init__(self):
        for name in ("n_questions", "memory_size", "d", "n_reads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_reads > self.memory_size:
            raise ValueError("n_reads cannot exceed memory_size")

    def to_dict(self):
        return asdict(self)


def init_params(cfg: MannConfig, seed: int = 0, sigma: float = 0.05) -> ParamRegistry:
    rng = np.random.default_rng(seed)
    Q, N, M = cfg.n_questions, cfg.memory_size, cfg.d

    def g(*shape):
        return rng.normal(0.0, sigma, size=shape)

    reg = ParamRegistry()
    reg.add("emb", g(2 * Q, M))
    reg.add("M0", g(N, M))
    reg.add("beta", np.zeros(1))
    reg.add("alpha", np.zeros(1))
    reg.add("E", g(M, M))
    reg.add("be", np.zeros(M))
    reg.add("D", g(M, M))
    reg.add("ba", np.zeros(M))
    reg.add("Wo", g(M, Q))
    reg.add("bo", np.zeros(Q))
    return reg


def key_strength(params) -> float:
    return float(softplus(params["beta"][0])) + BETA_FLOOR


def cosine_similarity(k, M):
    """(k . M(i)) / max(|k| |M(i)|, eps) for every row of ``M``.

    The floor only matters for (near) zero-norm vectors; above it the result
    is exactly invariant to rescaling ``k``.
    """
    dots = np.einsum("...m,...nm->...n", k, M)
    den = np.maximum(np.linalg.norm(k, axis=-1)[..., None] * np.linalg.norm(M, axis=-1), COSINE_EPS)
    return dots / den


def cosine_read_weight(k, M, beta: float):
    return softmax(beta * cosine_similarity(k, M))


def update_usage(wu_prev, wr, ww, gamma: float = USAGE_DECAY):
    return gamma * wu_prev + wr + ww


def least_used_weight(wu, n: int = 1):
    """1 where the usage is at most the n-th smallest usage, else 0."""
    wu = np.asarray(wu, dtype=float)
    N = wu.shape[-1]
    if not 1 <= n <= N:
        raise ValueError(f"n={n} outside [1, {N}]")
    nth = np.partition(wu, n - 1, axis=-1)[..., n - 1 : n]
    return (wu <= nth).astype(float)


def lrua_write_weight(wr_prev, wlu_prev, alpha: float):
    g = sigmoid(alpha)
    return g * wr_prev + (1.0 - g) * wlu_prev


def erase_add(params, v):
    e = sigmoid(affine(v, params["E"], params["be"]))
    a = tanh(affine(v, params["D"], params["ba"]))
    return e, a


def apply_write(M, w, e, a):
    w3 = w[..., :, None]
    return M * (1.0 - w3 * e[..., None, :]) + w3 * a[..., None, :]


def initial_state(params, n_rows: int):
    N = params["M0"].shape[0]
    return {
        "M": np.broadcast_to(params["M0"], (n_rows,) + params["M0"].shape).copy(),
        "wr": np.zeros((n_rows, N)),
        "wu": np.zeros((n_rows, N)),
        "wlu": np.zeros((n_rows, N)),
    }


def mann_step(params, state, x, n_reads: int = 1, active=None):
    """One timestep for a batch of joint indices ``x`` (1-based).

    Returns ``(p, next_state, cache)`` where ``p`` is (B, Q).  Rows with
    ``active`` False leave memory and weights untouched.
    """
    M = state["M"]
    nB = M.shape[0]
    act = np.ones(nB) if active is None else np.asarray(active, dtype=float)
    v = params["emb"][np.maximum(np.asarray(x) - 1, 0)]
    beta = key_strength(params)
    K = cosine_similarity(v, M)
    wr = softmax(beta * K)
    r = np.einsum("bn,bnm->bm", wr, M)
    p = sigmoid(affine(r, params["Wo"], params["bo"]))
    ww = lrua_write_weight(state["wr"], state["wlu"], params["alpha"][0]) * act[:, None]
    e, a = erase_add(params, v)
    M_next = apply_write(M, ww, e, a)
    wu = update_usage(state["wu"], wr, ww)
    wlu = least_used_weight(wu, n_reads)
    keep = act[:, None] > 0
    nxt = {
        "M": M_next,
        "wr": np.where(keep, wr, state["wr"]),
        "wu": np.where(keep, wu, state["wu"]),
        "wlu": np.where(keep, wlu, state["wlu"]),
    }
    cache = (v, M, K, wr, r, p, state["wr"], state["wlu"], ww, e, a)
    return p, nxt, cache


def _targets(batch: PaddedBatch):
    """Next-step targets: position t predicts (q_{t+1}, r_{t+1})."""
    valid = batch.mask[:, :-1] & batch.mask[:, 1:]
    q_next = np.maximum(batch.keys[:, 1:] - 1, 0)
    r_next = batch.responses[:, 1:]
    return valid, q_next, r_next


def forward(params: ParamRegistry, batch: PaddedBatch, n_reads: int = 1, keep_cache: bool = False):
    """Returns ``(scores, loss, cache)``; ``scores`` is (B, T-1) next-step probabilities."""
    nB, T = batch.keys.shape
    state = initial_state(params, nB)
    valid, q_next, r_next = _targets(batch)
    rows = np.arange(nB)
    scores = np.zeros((nB, max(T - 1, 0)))
    steps = [] if keep_cache else None
    for t in range(T - 1):
        if not valid[:, t].any():
            break
        p, state, cache = mann_step(params, state, batch.values[:, t], n_reads, batch.mask[:, t])
        scores[:, t] = p[rows, q_next[:, t]] * valid[:, t]
        if keep_cache:
            steps.append(cache)
    loss = float(binary_cross_entropy(scores[valid], r_next[valid]).sum()) if T > 1 else 0.0
    return scores, loss, {"steps": steps, "final_memory": state["M"]}


def backward(params: ParamRegistry, batch: PaddedBatch, cache) -> dict:
    grads = {name: np.zeros_like(params[name]) for name in params}
    E, D, Wo = params["E"], params["D"], params["Wo"]
    beta = key_strength(params)
    gate = float(sigmoid(params["alpha"][0]))
    valid, q_next, r_next = _targets(batch)
    steps = cache["steps"]
    nB = batch.keys.shape[0]
    rows = np.arange(nB)
    xi = np.maximum(batch.values - 1, 0)
    dM = np.zeros_like(cache["final_memory"])
    dwr_carry = np.zeros((nB, params["M0"].shape[0]))
    d_beta = 0.0
    d_gate = 0.0
    for t in range(len(steps) - 1, -1, -1):
        v, M, K, wr, r, p, wr_prev, wlu_prev, ww, e, a = steps[t]
        # write
        d_ww = np.einsum("bnm,bnm->bn", dM, a[:, None, :] - M * e[:, None, :])
        de = -np.einsum("bnm,bnm,bn->bm", dM, M, ww)
        da = np.einsum("bnm,bn->bm", dM, ww)
        dM = dM * (1.0 - ww[:, :, None] * e[:, None, :])
        # ww was zeroed on inactive rows, so the gate gradient is masked too
        d_ww = d_ww * batch.mask[:, t, None]
        d_gate += float(np.sum(d_ww * (wr_prev - wlu_prev)))
        dwr_prev = gate * d_ww
        dv_e, dE, dbe = affine_backward(activate_backward("sigmoid", de, e), v, E)
        dv_a, dD, dba = affine_backward(activate_backward("tanh", da, a), v, D)
        grads["E"] += dE
        grads["be"] += dbe
        grads["D"] += dD
        grads["ba"] += dba
        dv = dv_e + dv_a
        # output
        sel = p[rows, q_next[:, t]]
        dsel = binary_cross_entropy_grad(sel, r_next[:, t]) * valid[:, t]
        dlogits = np.zeros_like(p)
        dlogits[rows, q_next[:, t]] = dsel * sel * (1.0 - sel)
        dr, dWo, dbo = affine_backward(dlogits, r, Wo)
        grads["Wo"] += dWo
        grads["bo"] += dbo
        # read
        dwr = np.einsum("bm,bnm->bn", dr, M) + dwr_carry
        dM = dM + wr[:, :, None] * dr[:, None, :]
        dz = softmax_backward(dwr, wr)
        d_beta += float(np.sum(dz * K))
        dK = dz * beta
        # cosine
        nv = np.linalg.norm(v, axis=-1)
        nm = np.linalg.norm(M, axis=-1)
        prod = nv[:, None] * nm
        den = np.maximum(prod, COSINE_EPS)
        dots = K * den
        ddots = dK / den
        dden = np.where(prod > COSINE_EPS, -dK * dots / (den * den), 0.0)
        v_hat = v / np.where(nv > 0, nv, 1.0)[:, None]
        m_hat = M / np.where(nm > 0, nm, 1.0)[:, :, None]
        dv = dv + np.einsum("bn,bnm->bm", ddots, M) + (dden * nm).sum(axis=1)[:, None] * v_hat
        dM = dM + ddots[:, :, None] * v[:, None, :] + (dden * nv[:, None])[:, :, None] * m_hat
        np.add.at(grads["emb"], xi[:, t], dv)
        dwr_carry = dwr_prev
    grads["M0"] += dM.sum(axis=0)
    grads["beta"][0] = d_beta * float(sigmoid(params["beta"][0]))
    grads["alpha"][0] = d_gate * gate * (1.0 - gate)
    return grads


def loss_and_grad(params: ParamRegistry, batch: PaddedBatch, n_reads: int = 1):
    scores, loss, cache = forward(params, batch, n_reads, keep_cache=True)
    return loss, backward(params, batch, cache), scores


def score_points(params: ParamRegistry, batch: PaddedBatch, scores=None, n_reads: int = 1):
    if scores is None:
        scores, _, _ = forward(params, batch, n_reads)
    valid, _, r_next = _targets(batch)
    return scores[valid], r_next[valid]


def mann_sequence_loss(params: ParamRegistry, row: PaddedBatch, n_reads: int = 1) -> float:
    return forward(params, row, n_reads)[1]

"""Differentiable numerical primitives, parameter registry and optimizer.

Every model in this package is written as a forward pass that keeps a small
cache per timestep and a hand-chained backward pass built from the
``*_backward`` helpers below.  All functions operate on the last axis and
accept arbitrary leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, Mapping, Optional

import numpy as np
from scipy.special import expit

PROB_EPS = 1e-8


def _check_finite(name: str, z: np.ndarray) -> None:
    if not np.all(np.isfinite(z)):
        raise ValueError(f"{name}: non-finite input")


# ---------------------------------------------------------------------------
# elementwise / dense primitives
# ---------------------------------------------------------------------------


def affine(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = W^T x + b, with ``W`` stored as (d_in, d_out)."""
    x = np.asarray(x)
    if W.ndim != 2 or x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ValueError(
            f"affine: shape mismatch, x{tuple(x.shape)} W{tuple(W.shape)} b{tuple(b.shape)}"
        )
    return x @ W + b


def affine_backward(dy: np.ndarray, x: np.ndarray, W: np.ndarray):
    """Return (dx, dW, db) for ``y = affine(x, W, b)``; batch dims are summed."""
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dW = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = dy @ W.T
    return dx, dW, db


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    _check_finite("softmax", z)
    shifted = z - z.max(axis=axis, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=axis, keepdims=True)


def softmax_backward(dy: np.ndarray, y: np.ndarray, axis: int = -1) -> np.ndarray:
    return y * (dy - (dy * y).sum(axis=axis, keepdims=True))


def sigmoid(z):
    return expit(z)


def tanh(z):
    return np.tanh(z)


_ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh}


def activate(kind: str, z: np.ndarray) -> np.ndarray:
    if kind not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}")
    z = np.asarray(z, dtype=float)
    _check_finite(kind, z)
    return _ACTIVATIONS[kind](z)


def activate_backward(kind: str, dy: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient w.r.t. the pre-activation, given the activation output ``y``."""
    if kind == "sigmoid":
        return dy * y * (1.0 - y)
    if kind == "tanh":
        return dy * (1.0 - y * y)
    raise ValueError(f"unknown activation {kind!r}")


def softplus(z):
    return np.logaddexp(0.0, z)


# ---------------------------------------------------------------------------
# loss
# ---------------------------------------------------------------------------


def _check_labels(r) -> np.ndarray:
    r = np.asarray(r)
    if not np.all((r == 0) | (r == 1)):
        raise ValueError("binary_cross_entropy: labels must be 0 or 1")
    return r.astype(float)


def binary_cross_entropy(p, r, eps: float = PROB_EPS):
    """Elementwise -(r log p + (1-r) log(1-p)) with p clamped to [eps, 1-eps]."""
    r = _check_labels(r)
    pc = np.clip(p, eps, 1.0 - eps)
    return -(r * np.log(pc) + (1.0 - r) * np.log(1.0 - pc))


def binary_cross_entropy_grad(p, r, eps: float = PROB_EPS):
    """d loss / d p (pre-clamp); zero inside the clamp regions."""
    r = _check_labels(r)
    p = np.asarray(p, dtype=float)
    pc = np.clip(p, eps, 1.0 - eps)
    g = -r / pc + (1.0 - r) / (1.0 - pc)
    return np.where((p < eps) | (p > 1.0 - eps), 0.0, g)


# ---------------------------------------------------------------------------
# parameters and optimization
# ---------------------------------------------------------------------------


class ParamRegistry:
    """Named trainable arrays with matching gradient accumulators."""

    def __init__(self, values: Optional[Mapping[str, np.ndarray]] = None):
        self._values: Dict[str, np.ndarray] = {}
        self._grads: Dict[str, np.ndarray] = {}
        for name, value in (values or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> np.ndarray:
        if name in self._values:
            raise KeyError(f"duplicate parameter {name!r}")
        value = np.array(value, dtype=float)
        self._values[name] = value
        self._grads[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self._values[name]

    def __contains__(self, name: str) -> bool:
        return name in self._values

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def names(self):
        return list(self._values)

    def values(self) -> Dict[str, np.ndarray]:
        return self._values

    def grads(self) -> Dict[str, np.ndarray]:
        return self._grads

    def grad(self, name: str) -> np.ndarray:
        return self._grads[name]

    def set_grads(self, grads: Mapping[str, np.ndarray]) -> None:
        for name, g in grads.items():
            if g.shape != self._values[name].shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape for {name!r}")
            self._grads[name][...] = g

    def zero_grad(self) -> None:
        for g in self._grads.values():
            g.fill(0.0)

    def num_params(self) -> int:
        return int(sum(v.size for v in self._values.values()))

    def copy(self) -> "ParamRegistry":
        return ParamRegistry({k: v.copy() for k, v in self._values.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamRegistry) or self.names() != other.names():
            return False
        return all(np.array_equal(self[k], other[k]) for k in self)


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))


def clip_global_norm(grads: Mapping[str, np.ndarray], threshold: float) -> Dict[str, np.ndarray]:
    """Rescale all gradients jointly so their combined L2 norm is at most ``threshold``."""
    if threshold <= 0:
        raise ValueError("clip threshold must be positive")
    norm = global_norm(grads)
    if norm <= threshold:
        return {k: g.copy() for k, g in grads.items()}
    scale = threshold / norm
    return {k: g * scale for k, g in grads.items()}


@dataclass
class OptimizerState:
    momentum: float = 0.9
    clip: float = 50.0
    buffers: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.clip <= 0:
            raise ValueError("clip threshold must be positive")


def sgd_momentum_step(registry: ParamRegistry, state: OptimizerState, lr: float) -> None:
    """In place: v <- mu*v + g; theta <- theta - lr*v; then zero the gradients.

    Gradients are expected to be clipped already (see :func:`clip_global_norm`).
    """
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    for name in registry:
        g = registry.grad(name)
        v = state.buffers.get(name)
        if v is None:
            v = state.buffers[name] = np.zeros_like(g)
        v *= state.momentum
        v += g
        if lr != 0:
            registry[name][...] -= lr * v
    registry.zero_grad()


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


@dataclass
class GradcheckReport:
    max_rel_error: Dict[str, float]
    checked: Dict[str, int]

    @property
    def worst(self) -> float:
        return max(self.max_rel_error.values(), default=0.0)

    def passed(self, tol: float = 1e-4) -> bool:
        return self.worst < tol


def finite_diff_gradcheck(
    loss_and_grad: Callable[[ParamRegistry], tuple],
    registry: ParamRegistry,
    eps: float = 1e-4,
    max_coords: Optional[int] = 64,
    seed: int = 0,
) -> GradcheckReport:
    """Compare analytic gradients with central differences.

    ``loss_and_grad(registry)`` must return ``(loss, grads)`` with ``grads`` a
    mapping name -> array.  Tensors with more than ``max_coords`` entries are
    checked on a random subsample of coordinates.
    """
    loss0, grads = loss_and_grad(registry)
    loss1, _ = loss_and_grad(registry)
    if loss0 != loss1:
        raise ValueError("loss function is not deterministic")
    rng = np.random.default_rng(seed)
    worst: Dict[str, float] = {}
    counts: Dict[str, int] = {}
    for name in registry:
        theta = registry[name]
        flat = theta.reshape(-1)
        analytic = np.asarray(grads[name], dtype=float).reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        err = 0.0
        for i in idx:
            orig = flat[i]
            h = eps * max(1.0, abs(orig))
            flat[i] = orig + h
            lp, _ = loss_and_grad(registry)
            flat[i] = orig - h
            lm, _ = loss_and_grad(registry)
            flat[i] = orig
            numeric = (lp - lm) / (2.0 * h)
            a = analytic[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            err = max(err, rel)
        worst[name] = err
        counts[name] = int(idx.size)
    return GradcheckReport(worst, counts)

"""Differentiable building blocks with explicit backward passes.

Every forward op takes arrays with arbitrary leading (batch/time) axes and
acts on the last axis.  Backward functions take the upstream gradient plus
whatever the forward returned or consumed, accumulate parameter gradients
into :attr:`Parameter.grad`, and return the gradient w.r.t. the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "clipped_relu01", "identity")

LOG_FLOOR = 1e-12


class ConfigurationError(ValueError):
    """Raised for shape or configuration mismatches."""


@dataclass
class Parameter:
    """A trainable array with its gradient and Adam moments."""

    value: np.ndarray
    grad: np.ndarray = field(init=False)
    adam_m: np.ndarray = field(init=False)
    adam_v: np.ndarray = field(init=False)

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        self.adam_m = np.zeros_like(self.value)
        self.adam_v = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0


def dense(x: np.ndarray, W: Parameter, b: Parameter) -> np.ndarray:
    """``y = x @ W.T + b`` with W stored as [out, in]."""
    if W.value.ndim != 2 or x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise ConfigurationError(
            f"dense: x{x.shape} incompatible with W{W.shape}, b{b.shape}"
        )
    return x @ W.value.T + b.value


def dense_backward(gy: np.ndarray, x: np.ndarray, W: Parameter, b: Parameter) -> np.ndarray:
    g2 = gy.reshape(-1, gy.shape[-1])
    W.grad += g2.T @ x.reshape(-1, x.shape[-1])
    b.grad += g2.sum(axis=0)
    return gy @ W.value


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(x, 0.0)
    if kind == "clipped_relu01":
        return np.clip(x, 0.0, 1.0)
    if kind == "identity":
        return x
    raise ConfigurationError(f"unknown activation {kind!r}")


def activation_backward(gy: np.ndarray, x: np.ndarray, kind: str) -> np.ndarray:
    """Gradient through the activation; ``x`` is the pre-activation.

    Subgradient 0 at every kink.
    """
    if kind == "relu":
        return gy * (x > 0.0)
    if kind == "clipped_relu01":
        return gy * ((x > 0.0) & (x < 1.0))
    if kind == "identity":
        return gy
    raise ConfigurationError(f"unknown activation {kind!r}")


def softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(gp: np.ndarray, p: np.ndarray) -> np.ndarray:
    return p * (gp - (gp * p).sum(axis=-1, keepdims=True))


def _check_targets(target, M):
    target = np.asarray(target)
    if target.size and (target.min() < 0 or target.max() >= M):
        raise ConfigurationError(f"target index out of range [0, {M})")
    return target


def cross_entropy(p: np.ndarray, target) -> np.ndarray:
    """``-ln(max(p[target], LOG_FLOOR))`` per leading index.

    The clamp only bites below the floor, so e.g. a uniform ``p`` gives
    exactly ``ln M``.
    """
    target = _check_targets(target, p.shape[-1])
    picked = np.take_along_axis(p, target[..., None], axis=-1)[..., 0]
    return -np.log(np.maximum(picked, LOG_FLOOR))


def cross_entropy_backward(gl: np.ndarray, p: np.ndarray, target) -> np.ndarray:
    target = _check_targets(target, p.shape[-1])
    gp = np.zeros_like(p)
    picked = np.take_along_axis(p, target[..., None], axis=-1)
    g = np.where(picked > LOG_FLOOR, -np.asarray(gl)[..., None] / np.maximum(picked, LOG_FLOOR), 0.0)
    np.put_along_axis(gp, target[..., None], g, axis=-1)
    return gp


def softmax_cross_entropy_backward(gl: np.ndarray, p: np.ndarray, target) -> np.ndarray:
    """Fused gradient w.r.t. the logits: ``gl * (p - onehot(target))``.

    Exact wherever ``p[target]`` is above LOG_FLOOR (the clamped region has
    zero true gradient; this keeps the softmax gradient there instead).
    """
    target = _check_targets(target, p.shape[-1])
    g = p.copy()
    np.put_along_axis(g, target[..., None], np.take_along_axis(p, target[..., None], axis=-1) - 1.0, axis=-1)
    return g * np.asarray(gl)[..., None]


def one_hot(m, M: int) -> np.ndarray:
    m = np.asarray(m)
    if m.size and (m.min() < 0 or m.max() >= M):
        raise ConfigurationError(f"message index out of range [0, {M})")
    return (m[..., None] == np.arange(M)).astype(np.float64)

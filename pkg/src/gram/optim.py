"""Trainable parameters and the adaptive-moment optimizer."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor


class Parameter:
    """A named weight tensor with a gradient accumulator and optimizer
    moments.  The wrapped Tensor is persistent: forward passes reference it
    directly and gradients accumulate on it until the optimizer step."""

    __slots__ = ("name", "tensor", "m", "v", "step")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.tensor = Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)
        self.m = np.zeros_like(self.tensor.data)
        self.v = np.zeros_like(self.tensor.data)
        self.step = 0

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    def grad_array(self) -> np.ndarray:
        g = self.tensor.grad
        return np.zeros_like(self.tensor.data) if g is None else g

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.tensor.data.shape})"


def glorot(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform Glorot init; fan counts from the first two extents."""
    fan_in = shape[0]
    fan_out = shape[1] if len(shape) > 1 else shape[0]
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def global_grad_norm(params) -> float:
    total = 0.0
    for p in params:
        g = p.tensor.grad
        if g is not None:
            total += float((g * g).sum())
    return float(np.sqrt(total))


def clip_global_norm(params, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    norm = global_grad_norm(params)
    if norm > max_norm > 0.0:
        scale = max_norm / norm
        for p in params:
            if p.tensor.grad is not None:
                p.tensor.grad *= scale
    return norm


def adam_step(params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """Bias-corrected adaptive-moment update; clears gradients afterwards."""
    b1, b2 = betas
    for p in params:
        g = p.tensor.grad
        if g is None:
            continue
        p.step += 1
        p.m = b1 * p.m + (1.0 - b1) * g
        p.v = b2 * p.v + (1.0 - b2) * (g * g)
        mhat = p.m / (1.0 - b1 ** p.step)
        vhat = p.v / (1.0 - b2 ** p.step)
        p.tensor.data -= lr * mhat / (np.sqrt(vhat) + eps)
        p.tensor.grad = None

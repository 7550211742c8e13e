"""Trainable parameters and the Adam update rule."""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from .rng import Rng


class Parameter:
    """A named tensor with gradient and Adam state, all sharing one shape."""

    __slots__ = ("name", "value", "grad", "m", "v", "step")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.ascontiguousarray(value)
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.step = 0

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def zero_grads(params: Iterable[Parameter]) -> None:
    for p in params:
        p.zero_grad()


def adam_step(params: Iterable[Parameter], lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One Adam update with bias-corrected first/second moments."""
    for p in params:
        p.step += 1
        g = p.grad
        p.m *= beta1
        p.m += (1.0 - beta1) * g
        p.v *= beta2
        p.v += (1.0 - beta2) * (g * g)
        mhat = p.m / (1.0 - math.pow(beta1, p.step))
        vhat = p.v / (1.0 - math.pow(beta2, p.step))
        p.value -= lr * mhat / (np.sqrt(vhat) + eps)


def uniform_fanin(rng: Rng, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """Weights uniform in +-sqrt(1/fan_in); the default layer initializer."""
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)

"""SGD and Adam over MlpParams, plus global-norm gradient clipping."""

from __future__ import annotations

import math

import numpy as np

from .exceptions import ConfigError
from .nets import GradArrays, MlpParams, grad_norm


class Sgd:
    """Plain stochastic gradient descent."""

    def __init__(self, lr: float):
        if lr <= 0.0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.lr = lr

    def step(self, params: MlpParams, grads: GradArrays) -> None:
        lr = self.lr
        for (w, b), (dw, db) in zip(zip(params.weights, params.biases), grads):
            w -= lr * dw
            b -= lr * db


class Adam:
    """Adam with bias correction; moment buffers are allocated lazily."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0.0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
            raise ConfigError(f"betas must lie in [0, 1): {beta1}, {beta2}")
        if eps <= 0.0:
            raise ConfigError(f"eps must be positive, got {eps}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self._t = 0
        self._m: list[np.ndarray] | None = None
        self._v: list[np.ndarray] | None = None

    def step(self, params: MlpParams, grads: GradArrays) -> None:
        flat_params = list(params.weights) + list(params.biases)
        flat_grads = [dw for dw, _ in grads] + [db for _, db in grads]
        if self._m is None:
            self._m = [np.zeros_like(a) for a in flat_params]
            self._v = [np.zeros_like(a) for a in flat_params]
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        corr1 = 1.0 - b1**self._t
        corr2 = 1.0 - b2**self._t
        lr, eps = self.lr, self.eps
        for theta, g, m, v in zip(flat_params, flat_grads, self._m, self._v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            theta -= lr * (m / corr1) / (np.sqrt(v / corr2) + eps)


def make_optimizer(kind: str, lr: float):
    if kind == "sgd":
        return Sgd(lr)
    if kind == "adam":
        return Adam(lr)
    raise ConfigError(f"unknown optimizer {kind!r}")


def clip_gradient_norm(grads: GradArrays, max_norm: float) -> float:
    """Scale grads in place so their global L2 norm is at most max_norm."""
    if max_norm <= 0.0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    norm = grad_norm(grads)
    if norm > max_norm and math.isfinite(norm):
        scale = max_norm / norm
        for dw, db in grads:
            dw *= scale
            db *= scale
    return norm

"""Small MLP policy/value networks on top of the scalar engine.

Parameters live in numpy arrays. A forward pass can run graph-free (action
sampling, evaluation) or build a differentiation graph whose parameter
gradients accumulate into caller-supplied arrays. Both paths share the same
numpy value computations, so their outputs agree bit for bit; trainers rely
on that when they record behavior probabilities at collection time and
recompute them later inside a loss graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import DiffNode
from .exceptions import ConfigError, ShapeError

_ACTIVATIONS = ("tanh", "relu")

# One (dW, db) pair per layer, matching MlpParams.weights / .biases.
GradArrays = list[tuple[np.ndarray, np.ndarray]]


@dataclass
class MlpParams:
    """Dense-network parameters: weights[k] has shape (out_k, in_k)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if not self.weights or len(self.weights) != len(self.biases):
            raise ShapeError("weights and biases must be non-empty and parallel")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {k}: weight {w.shape} vs bias {b.shape}")
            if k > 0 and w.shape[1] != self.weights[k - 1].shape[0]:
                raise ShapeError(
                    f"layer {k} expects {w.shape[1]} inputs, previous layer "
                    f"produces {self.weights[k - 1].shape[0]}"
                )

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    @classmethod
    def init(
        cls,
        layer_sizes: Sequence[int],
        rng: np.random.Generator,
        activation: str = "tanh",
    ) -> "MlpParams":
        """Uniform init in +-sqrt(6 / (fan_in + fan_out)); zero biases."""
        sizes = list(layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise ConfigError(f"layer sizes must be >= 1 with >= 2 layers: {sizes}")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = math.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases, activation)


def zero_grads(params: MlpParams) -> GradArrays:
    """Fresh gradient accumulators matching the parameter layout."""
    return [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(params.weights, params.biases)]


def grad_norm(grads: GradArrays) -> float:
    total = 0.0
    for dw, db in grads:
        total += float((dw * dw).sum()) + float((db * db).sum())
    return math.sqrt(total)


class _LayerNode(DiffNode):
    """One output unit of a dense layer, fused over its whole input row.

    Parameter gradients go straight into the accumulator arrays; gradients
    for differentiable inputs (hidden activations) go to their nodes. Layer-1
    inputs are plain observation constants and carry no nodes.
    """

    __slots__ = ("_wrow", "_gw", "_gb", "_row", "_xnodes", "_xvals")
    _OWNS_ARRAYS = True

    def __init__(self, value, wrow, gw, gb, row, xnodes, xvals):
        super().__init__(value)
        self._wrow = wrow
        self._gw = gw
        self._gb = gb
        self._row = row
        self._xnodes = xnodes
        self._xvals = xvals

    def _grad_arrays(self):
        return (self._gw, self._gb)

    def _parent_nodes(self):
        return self._xnodes if self._xnodes is not None else ()

    def _propagate(self) -> None:
        g = self.grad
        r = self._row
        self._gw[r] += g * self._xvals
        self._gb[r] += g
        xn = self._xnodes
        if xn is not None:
            w = self._wrow
            for j, node in enumerate(xn):
                node.grad += w[j] * g


def _forward_arrays(params: MlpParams, x: np.ndarray):
    """Shared numpy forward pass: (pre-activations, activations, outputs)."""
    pres, acts = [], []
    a = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        pre = w @ a + b
        if k == last:
            return pres, acts, pre
        a = np.tanh(pre) if params.activation == "tanh" else np.maximum(pre, 0.0)
        pres.append(pre)
        acts.append(a)
    raise AssertionError("unreachable")


def _check_input(params: MlpParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.in_dim,):
        raise ShapeError(f"input shape {x.shape} does not match in_dim {params.in_dim}")
    return x


def forward_values(params: MlpParams, x) -> tuple[np.ndarray, float]:
    """Graph-free forward pass: (logit vector, value-head output)."""
    x = _check_input(params, x)
    _, _, out = _forward_arrays(params, x)
    return out[:-1], float(out[-1])


def forward_mlp(
    params: MlpParams,
    x,
    grads: GradArrays | None = None,
) -> tuple[list[DiffNode], DiffNode]:
    """Differentiable forward pass: (logit nodes, value node).

    The last output row is the value head; the rest are logits. Parameter
    gradients accumulate into `grads` (freshly allocated when omitted, so
    pass your own accumulators to share them across a batch).
    """
    x = _check_input(params, x)
    if grads is None:
        grads = zero_grads(params)
    pres, acts, out = _forward_arrays(params, x)
    xnodes: list[DiffNode] | None = None
    xvals = x
    last = len(params.weights) - 1
    tanh_act = params.activation == "tanh"
    for k, (w, _b) in enumerate(zip(params.weights, params.biases)):
        gw, gb = grads[k]
        vals = out if k == last else pres[k]
        units = [
            _LayerNode(vals[r], w[r], gw, gb, r, xnodes, xvals)
            for r in range(w.shape[0])
        ]
        if k == last:
            return units[:-1], units[-1]
        avals = acts[k]
        if tanh_act:
            xnodes = [
                DiffNode(avals[r], ((units[r], 1.0 - float(avals[r]) ** 2),))
                for r in range(len(units))
            ]
        else:
            xnodes = [
                DiffNode(avals[r], ((units[r], 1.0 if vals[r] > 0.0 else 0.0),))
                for r in range(len(units))
            ]
        xvals = avals
    raise AssertionError("unreachable")

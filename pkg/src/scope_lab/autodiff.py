"""Scalar reverse-mode differentiation engine.

Graphs are built implicitly: every operation on a DiffNode returns a new node
that records its parents together with the local partial derivatives, so a
later `backward` call can replay the computation in reverse. Nodes are scalar;
the only concessions to speed are fused ops (dense layers in `nets`, the
softmax head below) whose values are computed with numpy but whose adjoints
are still hand-written scalar accumulations.

Construction order doubles as a topological order: a node can only ever refer
to parents created before it, which `backward` exploits instead of running a
full topological sort from scratch.
"""

from __future__ import annotations

import itertools
import math
from operator import attrgetter
from typing import Callable, Sequence

import numpy as np

from .exceptions import ConfigError, GraphError, NumericError

_ids = itertools.count()
_by_id = attrgetter("_id")


class DiffNode:
    """A single scalar value plus its accumulated gradient.

    `_edges` holds `(parent, local_partial)` pairs; leaves carry an empty
    tuple. Subclasses used for fused operations override `_parent_nodes` and
    `_propagate` instead of populating `_edges`.
    """

    __slots__ = ("value", "grad", "_edges", "_id")
    _OWNS_ARRAYS = False

    def __init__(self, value: float, edges: tuple = ()):
        self.value = float(value)
        self.grad = 0.0
        self._edges = edges
        self._id = next(_ids)

    def __repr__(self) -> str:
        return f"DiffNode(value={self.value!r}, grad={self.grad!r})"

    # -- graph plumbing ---------------------------------------------------

    def _parent_nodes(self):
        return [p for p, _ in self._edges]

    def _propagate(self) -> None:
        g = self.grad
        for parent, partial in self._edges:
            parent.grad += partial * g

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, DiffNode):
            return DiffNode(self.value + other.value, ((self, 1.0), (other, 1.0)))
        return DiffNode(self.value + float(other), ((self, 1.0),))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, DiffNode):
            return DiffNode(self.value - other.value, ((self, 1.0), (other, -1.0)))
        return DiffNode(self.value - float(other), ((self, 1.0),))

    def __rsub__(self, other):
        return DiffNode(float(other) - self.value, ((self, -1.0),))

    def __mul__(self, other):
        if isinstance(other, DiffNode):
            return DiffNode(
                self.value * other.value,
                ((self, other.value), (other, self.value)),
            )
        other = float(other)
        return DiffNode(self.value * other, ((self, other),))

    __rmul__ = __mul__

    def __neg__(self):
        return DiffNode(-self.value, ((self, -1.0),))

    def __truediv__(self, other):
        if isinstance(other, DiffNode):
            inv = 1.0 / other.value
            val = self.value * inv
            return DiffNode(val, ((self, inv), (other, -val * inv)))
        # True division, not multiplication by the reciprocal: ratio tests
        # elsewhere rely on x / x == 1.0 exactly.
        other = float(other)
        return DiffNode(self.value / other, ((self, 1.0 / other),))

    def __rtruediv__(self, other):
        inv = 1.0 / self.value
        val = float(other) * inv
        return DiffNode(val, ((self, -val * inv),))


def log(x: DiffNode) -> DiffNode:
    return DiffNode(math.log(x.value), ((x, 1.0 / x.value),))


def exp(x: DiffNode) -> DiffNode:
    v = math.exp(x.value)
    return DiffNode(v, ((x, v),))


def tanh(x: DiffNode) -> DiffNode:
    v = math.tanh(x.value)
    return DiffNode(v, ((x, 1.0 - v * v),))


def clamp(x: DiffNode, lo: float, hi: float) -> DiffNode:
    """Clamp to [lo, hi]; the gradient is 1 strictly inside, 0 outside."""
    v = x.value
    if v < lo:
        return DiffNode(lo, ((x, 0.0),))
    if v > hi:
        return DiffNode(hi, ((x, 0.0),))
    return DiffNode(v, ((x, 1.0),))


def power(x: DiffNode, exponent: float) -> DiffNode:
    """x ** exponent for a constant real exponent.

    Negative bases with a non-integer exponent use the odd extension
    sign(x) * |x|**exponent, which keeps the result real and agrees with the
    plain power at exponent 1. exponent == 0 returns exactly 1 for any base.
    The derivative at a zero base is clamped to 0 for exponents below 1.
    """
    g = float(exponent)
    v = x.value
    if g == 0.0:
        return DiffNode(1.0, ((x, 0.0),))
    if v > 0.0:
        val = v**g
        dv = g * v ** (g - 1.0)
    elif v == 0.0:
        val = 0.0
        dv = 1.0 if g == 1.0 else 0.0
    elif g.is_integer():
        val = v**g
        dv = g * v ** (g - 1.0)
    else:
        a = -v
        val = -(a**g)
        dv = g * a ** (g - 1.0)
    return DiffNode(val, ((x, dv),))


def minimum(a: DiffNode, b) -> DiffNode:
    """min(a, b); on ties the result (and gradient) follows `b`."""
    bv = b.value if isinstance(b, DiffNode) else float(b)
    if a.value < bv:
        return DiffNode(a.value, ((a, 1.0),))
    if isinstance(b, DiffNode):
        return DiffNode(bv, ((b, 1.0),))
    return DiffNode(bv, ())


def add_n(nodes: Sequence[DiffNode]) -> DiffNode:
    """Sum of many nodes as a single fan-in node."""
    if not nodes:
        raise ValueError("add_n needs at least one node")
    total = 0.0
    for n in nodes:
        total += n.value
    return DiffNode(total, tuple((n, 1.0) for n in nodes))


class _SoftmaxNode(DiffNode):
    """One component of a fused softmax over a shared logit vector."""

    __slots__ = ("_logits", "_pvals", "_idx")

    def __init__(self, value, logits, pvals, idx):
        super().__init__(value)
        self._logits = logits
        self._pvals = pvals
        self._idx = idx

    def _parent_nodes(self):
        return self._logits

    def _propagate(self) -> None:
        g = self.grad
        p = self._pvals
        j = self._idx
        w = (-p[j] * g) * p
        w[j] += p[j] * g
        for k, node in enumerate(self._logits):
            node.grad += w[k]


def softmax_values(logits: np.ndarray) -> np.ndarray:
    """Numerically stabilized softmax on a plain float vector."""
    if logits.size == 0:
        raise NumericError("softmax of an empty vector")
    if not np.all(np.isfinite(logits)):
        raise NumericError("softmax input contains NaN or infinity")
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax(logits: Sequence[DiffNode]) -> list[DiffNode]:
    """Differentiable softmax over a vector of scalar nodes."""
    nodes = list(logits)
    vals = np.array([n.value for n in nodes], dtype=np.float64)
    p = softmax_values(vals)
    return [_SoftmaxNode(p[j], nodes, p, j) for j in range(len(nodes))]


def backward(loss: DiffNode) -> dict[DiffNode, float]:
    """Reverse pass from `loss` through everything reachable.

    All reachable gradients (scalar `.grad` slots and any fused-layer
    accumulator arrays) are zeroed first, so repeated calls are safe and
    always report the gradient of this loss alone. Returns a table mapping
    each reachable plain leaf node to its gradient; fused-layer parameter
    gradients land in the accumulator arrays the layers were built with.
    """
    if not isinstance(loss, DiffNode):
        raise TypeError(f"backward expects a DiffNode, got {type(loss).__name__}")
    seen = {id(loss)}
    order = [loss]
    stack = [loss]
    arrays: dict[int, np.ndarray] = {}
    leaves: list[DiffNode] = []
    while stack:
        n = stack.pop()
        n.grad = 0.0
        if n._OWNS_ARRAYS:
            for a in n._grad_arrays():
                arrays[id(a)] = a
        nid = n._id
        if type(n) is DiffNode:
            if not n._edges:
                leaves.append(n)
            parents = n._edges
            for p, _w in parents:
                if p._id >= nid:
                    raise GraphError("cycle detected in differentiation graph")
                pid = id(p)
                if pid not in seen:
                    seen.add(pid)
                    order.append(p)
                    stack.append(p)
        else:
            for p in n._parent_nodes():
                if p._id >= nid:
                    raise GraphError("cycle detected in differentiation graph")
                pid = id(p)
                if pid not in seen:
                    seen.add(pid)
                    order.append(p)
                    stack.append(p)
    for a in arrays.values():
        a[...] = 0.0
    order.sort(key=_by_id, reverse=True)
    loss.grad = 1.0
    for n in order:
        if n.grad != 0.0:
            n._propagate()
    return {leaf: leaf.grad for leaf in leaves}


def finite_difference_gradient(f: Callable, params, h: float = 1e-6):
    """Central-difference gradient of a scalar function.

    `params` may be a numpy array, a sequence of numpy arrays, or an
    MlpParams-like object exposing `weights` and `biases` lists. Entries are
    perturbed in place and restored; the return value mirrors the structure
    of the input (for the params-like case: a list of (dW, db) pairs matching
    the gradient-accumulator layout used by the network code).
    """
    if h <= 0.0:
        raise ConfigError(f"finite-difference step must be positive, got {h}")

    def _grad_of(arrays):
        grads = [np.zeros_like(a) for a in arrays]
        for a, g in zip(arrays, grads):
            flat = a.reshape(-1)
            gflat = g.reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                fp = float(f(params))
                flat[k] = orig - h
                fm = float(f(params))
                flat[k] = orig
                gflat[k] = (fp - fm) / (2.0 * h)
        return grads

    if isinstance(params, np.ndarray):
        return _grad_of([params])[0]
    if hasattr(params, "weights") and hasattr(params, "biases"):
        arrays = list(params.weights) + list(params.biases)
        grads = _grad_of(arrays)
        nw = len(params.weights)
        return list(zip(grads[:nw], grads[nw:]))
    arrays = list(params)
    if not all(isinstance(a, np.ndarray) for a in arrays):
        raise TypeError("finite_difference_gradient expects numpy arrays")
    return _grad_of(arrays)

"""Reverse-mode automatic differentiation over float64 numpy arrays.

A dynamic tape: every operation on :class:`Var` records its parents and one
vector-Jacobian callback per parent. :func:`backward` walks the tape once in
reverse topological order and accumulates gradients into the leaves. Only
the operations needed by the denoiser MLP and its weighted squared-error
losses are provided; everything is float64 and single-threaded, so repeated
runs accumulate in the same order and reproduce bit-identical gradients.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import expit

from .errors import NonScalarLossError

Array = np.ndarray


class Var:
    """A tape node: a float64 array plus the recipe for its local gradients."""

    __slots__ = ("value", "parents", "vjps", "grad")

    # keep numpy from consuming Vars elementwise; arithmetic with ndarrays
    # must fall through to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value, parents: tuple = (), vjps: tuple = ()):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents
        self.vjps = vjps
        self.grad: Array | None = None

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Var(shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("division by a Var is not supported; multiply by a constant inverse")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))


def lift(x) -> Var:
    """Wrap a constant as a leaf Var (no-op on existing Vars)."""
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(grad: Array, shape: tuple) -> Array:
    """Sum `grad` down to `shape`, inverting numpy broadcasting."""
    g = grad
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Var:
    a, b = lift(a), lift(b)
    return Var(
        a.value + b.value,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.value.shape),
            lambda g: _unbroadcast(g, b.value.shape),
        ),
    )


def sub(a, b) -> Var:
    a, b = lift(a), lift(b)
    return Var(
        a.value - b.value,
        (a, b),
        (
            lambda g: _unbroadcast(g, a.value.shape),
            lambda g: _unbroadcast(-g, b.value.shape),
        ),
    )


def mul(a, b) -> Var:
    a, b = lift(a), lift(b)
    return Var(
        a.value * b.value,
        (a, b),
        (
            lambda g: _unbroadcast(g * b.value, a.value.shape),
            lambda g: _unbroadcast(g * a.value, b.value.shape),
        ),
    )


def matmul(a, b) -> Var:
    a, b = lift(a), lift(b)
    return Var(
        a.value @ b.value,
        (a, b),
        (
            lambda g: g @ b.value.T,
            lambda g: a.value.T @ g,
        ),
    )


def square(a) -> Var:
    a = lift(a)
    return Var(a.value * a.value, (a,), (lambda g: g * (2.0 * a.value),))


def silu(a) -> Var:
    """x * sigmoid(x); the gradient is sigmoid(x) * (1 + x * (1 - sigmoid(x)))."""
    a = lift(a)
    s = expit(a.value)
    return Var(a.value * s, (a,), (lambda g: g * (s * (1.0 + a.value * (1.0 - s))),))


def concat(parts: Sequence, axis: int = 1) -> Var:
    parts = [lift(p) for p in parts]
    value = np.concatenate([p.value for p in parts], axis=axis)
    offsets = np.cumsum([0] + [p.value.shape[axis] for p in parts])

    def make_vjp(i):
        lo, hi = offsets[i], offsets[i + 1]

        def vjp(g):
            index = [slice(None)] * g.ndim
            index[axis] = slice(lo, hi)
            return g[tuple(index)]

        return vjp

    return Var(value, tuple(parts), tuple(make_vjp(i) for i in range(len(parts))))


def take_rows(table, idx) -> Var:
    """Row gather `table[idx]`; the backward pass scatter-adds into the table."""
    table = lift(table)
    idx = np.asarray(idx, dtype=np.int64)

    def vjp(g):
        out = np.zeros_like(table.value)
        np.add.at(out, idx, g)
        return out

    return Var(table.value[idx], (table,), (vjp,))


def sum_rows(a) -> Var:
    """Sum over axis 1 of a 2-D array, giving one value per row."""
    a = lift(a)
    n = a.value.shape[1]
    return Var(
        a.value.sum(axis=1),
        (a,),
        (lambda g: np.broadcast_to(g[:, None], (g.shape[0], n)),),
    )


def sum_all(a) -> Var:
    a = lift(a)
    return Var(a.value.sum(), (a,), (lambda g: np.broadcast_to(g, a.value.shape),))


def backward(root: Var) -> None:
    """Populate `.grad` on every node reachable from a scalar `root`.

    Single use per graph: grads are accumulated from None, so calling this
    twice on the same tape would double-count.
    """
    if root.value.ndim != 0:
        raise NonScalarLossError(
            f"backward requires a scalar loss, got shape {root.value.shape}"
        )

    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            stack.append((parent, False))

    root.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node.grad is None:
            continue
        for parent, vjp in zip(node.parents, node.vjps):
            contribution = vjp(node.grad)
            parent.grad = contribution if parent.grad is None else parent.grad + contribution

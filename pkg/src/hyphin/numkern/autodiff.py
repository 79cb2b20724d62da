"""Reverse-mode differentiation over a recorded operation graph.

Every operation returns a new ``Tensor`` holding its float64 value, its
parent tensors and a closure that maps the upstream gradient to per-parent
contributions. ``backward`` walks the graph once in reverse topological
order, so one scalar loss yields gradients for every trainable tensor.
Graph traversal and gradient accumulation both follow construction order,
keeping repeated runs bit-identical.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..errors import ContractError, DimensionError
from .dense import softmax_rows


class Tensor:
    """A node in the recorded computation graph."""

    __slots__ = ("value", "parents", "requires_grad", "name", "_bwd")

    def __init__(self, value, parents=(), bwd=None, requires_grad=False, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = tuple(parents)
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._bwd = bwd

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __repr__(self):
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.value.shape})"

    # operator sugar; non-Tensor operands become constants
    def __add__(self, other):
        return add(self, as_tensor(other))

    def __radd__(self, other):
        return add(as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    def __rmul__(self, other):
        return mul(as_tensor(other), self)

    def __truediv__(self, other):
        return div(self, as_tensor(other))

    def __rtruediv__(self, other):
        return div(as_tensor(other), self)

    def __neg__(self):
        return mul(self, constant(-1.0))

    def __matmul__(self, other):
        return matmul(self, as_tensor(other))

    def __pow__(self, exponent):
        return power(self, exponent)


def constant(value, name=None) -> Tensor:
    return Tensor(value, name=name)


def parameter(value, name=None) -> Tensor:
    return Tensor(value, requires_grad=True, name=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _unbroadcast(grad: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def add(a: Tensor, b: Tensor) -> Tensor:
    value = a.value + b.value

    def bwd(g):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(g, b.shape))]

    return Tensor(value, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    value = a.value - b.value

    def bwd(g):
        return [(a, _unbroadcast(g, a.shape)), (b, _unbroadcast(-g, b.shape))]

    return Tensor(value, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    value = a.value * b.value

    def bwd(g):
        return [
            (a, _unbroadcast(g * b.value, a.shape)),
            (b, _unbroadcast(g * a.value, b.shape)),
        ]

    return Tensor(value, (a, b), bwd)


def div(a: Tensor, b: Tensor) -> Tensor:
    value = a.value / b.value

    def bwd(g):
        return [
            (a, _unbroadcast(g / b.value, a.shape)),
            (b, _unbroadcast(-g * a.value / (b.value * b.value), b.shape)),
        ]

    return Tensor(value, (a, b), bwd)


def power(a: Tensor, exponent: float) -> Tensor:
    exponent = float(exponent)
    value = a.value**exponent

    def bwd(g):
        return [(a, g * exponent * a.value ** (exponent - 1.0))]

    return Tensor(value, (a,), bwd)


def exp(a: Tensor) -> Tensor:
    value = np.exp(a.value)

    def bwd(g):
        return [(a, g * value)]

    return Tensor(value, (a,), bwd)


def log(a: Tensor) -> Tensor:
    value = np.log(a.value)

    def bwd(g):
        return [(a, g / a.value)]

    return Tensor(value, (a,), bwd)


def tanh(a: Tensor) -> Tensor:
    value = np.tanh(a.value)

    def bwd(g):
        return [(a, g * (1.0 - value * value))]

    return Tensor(value, (a,), bwd)


def elu(a: Tensor, alpha: float = 1.0) -> Tensor:
    positive = a.value > 0
    value = np.where(positive, a.value, alpha * np.expm1(a.value))

    def bwd(g):
        # for x <= 0 the local slope is alpha*e^x = value + alpha
        return [(a, g * np.where(positive, 1.0, value + alpha))]

    return Tensor(value, (a,), bwd)


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    positive = a.value > 0
    value = np.where(positive, a.value, slope * a.value)

    def bwd(g):
        return [(a, g * np.where(positive, 1.0, slope))]

    return Tensor(value, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim == 2 and b.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise DimensionError(
                f"matmul shapes {a.shape} and {b.shape} are incompatible"
            )
        value = a.value @ b.value

        def bwd(g):
            return [(a, g @ b.value.T), (b, a.value.T @ g)]

    elif a.ndim == 2 and b.ndim == 1:
        if a.shape[1] != b.shape[0]:
            raise DimensionError(
                f"matmul shapes {a.shape} and {b.shape} are incompatible"
            )
        value = a.value @ b.value

        def bwd(g):
            return [(a, np.outer(g, b.value)), (b, a.value.T @ g)]

    else:
        raise DimensionError(
            f"matmul supports 2-D @ 2-D or 2-D @ 1-D, got {a.shape} @ {b.shape}"
        )
    return Tensor(value, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError(f"transpose expects 2-D, got shape {a.shape}")
    value = a.value.T.copy()

    def bwd(g):
        return [(a, g.T)]

    return Tensor(value, (a,), bwd)


def reshape(a: Tensor, shape) -> Tensor:
    value = a.value.reshape(shape)

    def bwd(g):
        return [(a, g.reshape(a.shape))]

    return Tensor(value, (a,), bwd)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    value = a.value.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if axis is None:
            return [(a, np.broadcast_to(g, a.shape).copy())]
        expanded = g if keepdims else np.expand_dims(g, axis)
        return [(a, np.broadcast_to(expanded, a.shape).copy())]

    return Tensor(value, (a,), bwd)


def mean_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.value.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), constant(1.0 / count))


def slice1d(a: Tensor, start: int, stop: int) -> Tensor:
    if a.ndim != 1:
        raise DimensionError(f"slice1d expects 1-D, got shape {a.shape}")
    value = a.value[start:stop].copy()

    def bwd(g):
        full = np.zeros(a.shape)
        full[start:stop] = g
        return [(a, full)]

    return Tensor(value, (a,), bwd)


def pick(a: Tensor, index: int) -> Tensor:
    if a.ndim != 1:
        raise DimensionError(f"pick expects 1-D, got shape {a.shape}")
    value = a.value[index]

    def bwd(g):
        full = np.zeros(a.shape)
        full[index] = g
        return [(a, full)]

    return Tensor(value, (a,), bwd)


def stack1d(items: Sequence[Tensor]) -> Tensor:
    items = list(items)
    value = np.array([float(t.value) for t in items])

    def bwd(g):
        return [(t, np.asarray(g[i])) for i, t in enumerate(items)]

    return Tensor(value, tuple(items), bwd)


def masked_row_softmax(a: Tensor, mask) -> Tensor:
    mask = np.asarray(mask, dtype=bool)
    value = softmax_rows(a.value, mask)

    def bwd(g):
        inner = (g * value).sum(axis=1, keepdims=True)
        return [(a, value * (g - inner))]

    return Tensor(value, (a,), bwd)


def masked_row_logsumexp(a: Tensor, mask) -> Tensor:
    """Per-row log-sum-exp over the masked columns, shape (rows,)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != a.shape:
        raise DimensionError(
            f"mask shape {mask.shape} does not match input shape {a.shape}"
        )
    if np.any(~mask.any(axis=1)):
        row = int(np.flatnonzero(~mask.any(axis=1))[0])
        raise ContractError(f"logsumexp row {row} has an empty mask")
    neg_inf = np.where(mask, a.value, -np.inf)
    shift = neg_inf.max(axis=1, keepdims=True)
    expd = np.where(mask, np.exp(neg_inf - shift), 0.0)
    total = expd.sum(axis=1, keepdims=True)
    value = (shift + np.log(total)).reshape(-1)
    softmax = expd / total

    def bwd(g):
        return [(a, softmax * g[:, None])]

    return Tensor(value, (a,), bwd)


def row_blend(keep_rows, a: Tensor, b: Tensor) -> Tensor:
    """Rows of ``a`` where ``keep_rows`` holds, rows of ``b`` elsewhere."""
    keep = np.asarray(keep_rows, dtype=bool)
    if a.shape != b.shape or keep.shape != (a.shape[0],):
        raise DimensionError(
            f"row_blend shapes {a.shape}, {b.shape}, cond {keep.shape}"
        )
    sel = keep[:, None]
    value = np.where(sel, a.value, b.value)

    def bwd(g):
        return [(a, g * sel), (b, g * ~sel)]

    return Tensor(value, (a, b), bwd)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order  # parents precede children


def backward(output: Tensor, trainables: Iterable[Tensor] | None = None):
    """Gradients of a scalar output for every trainable tensor.

    Returns a dict keyed by tensor object. With ``trainables`` given, every
    requested tensor has an entry; tensors outside the recorded graph get
    a zero gradient of their own shape.
    """
    if output.shape != ():
        raise ContractError(
            f"backward requires a scalar output, got shape {output.shape}"
        )
    order = _topo_order(output)

    # propagate only where a trainable leaf is reachable below
    needs: dict[int, bool] = {}
    for node in order:  # parents first
        needs[id(node)] = node.requires_grad or any(
            needs[id(p)] for p in node.parents
        )

    grads: dict[int, np.ndarray] = {id(output): np.ones(())}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node._bwd is None:
            continue
        for parent, contribution in node._bwd(g):
            if not needs.get(id(parent), False):
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contribution
            else:
                grads[key] = np.asarray(contribution, dtype=np.float64)

    if trainables is None:
        return {
            node: grads[id(node)]
            for node in order
            if node.requires_grad and id(node) in grads
        }
    return {
        t: grads.get(id(t), np.zeros(t.shape)) for t in trainables
    }

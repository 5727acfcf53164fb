"""Reverse-mode automatic differentiation on float64 numpy arrays.

A ``Tensor`` wraps an ndarray and records the operations applied to it in a
tape (a DAG of parent links plus per-node backward closures).  Calling
``backward`` on a scalar loss walks the tape in reverse topological order and
assigns each reachable tensor's gradient.  Everything runs in double
precision so that finite-difference gradient checks are meaningful.

Forward evaluation never mutates inputs; tensors whose ancestors do not
require gradients carry no tape, so evaluating a frozen model is free of
bookkeeping overhead.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible with an operation."""


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a


class Tensor:
    """A node in the computation graph: a float64 array plus tape links."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    # make `ndarray <op> Tensor` defer to the reflected Tensor methods
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def param(data) -> "Tensor":
        return Tensor(data, requires_grad=True)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_ensure(other)))

    def __rsub__(self, other):
        return add(_ensure(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_ensure(other), self)

    def __pow__(self, exponent):
        return powc(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def sum(self, axis=None, keepdims: bool = False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    # -- backward pass ---------------------------------------------------------

    def backward(self) -> None:
        """Assign ``grad`` on every tensor this scalar loss depends on.

        Gradients are overwritten, not accumulated: each call is
        self-contained.  Raises if the loss is not a finite scalar.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {self.data.shape}")
        if not np.isfinite(self.data):
            raise FloatingPointError("backward on a non-finite loss")

        order = _topo_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in order:
            g = grads.pop(id(node), None)
            if g is None:
                continue
            node.grad = g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                acc = grads.get(id(parent))
                grads[id(parent)] = pg if acc is None else acc + pg


def _topo_order(root: Tensor) -> list[Tensor]:
    # Iterative post-order DFS, reversed: parents come after their children.
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
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    order.reverse()
    return order


def _ensure(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- primitive operations ------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out = a.data + b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape),
                                         _unbroadcast(g, b.data.shape)))


def mul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out = a.data * b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                         _unbroadcast(g * a.data, b.data.shape)))


def div(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    out = a.data / b.data
    return _make(out, (a, b), lambda g: (_unbroadcast(g / b.data, a.data.shape),
                                         _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))


def neg(a) -> Tensor:
    a = _ensure(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def powc(a, exponent: float) -> Tensor:
    a = _ensure(a)
    e = float(exponent)
    out = a.data ** e
    return _make(out, (a,), lambda g: (g * e * a.data ** (e - 1.0),))


def matmul(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul inner dims differ: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data
    return _make(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def tanh(a) -> Tensor:
    a = _ensure(a)
    t = np.tanh(a.data)
    return _make(t, (a,), lambda g: (g * (1.0 - t * t),))


def sigmoid(a) -> Tensor:
    a = _ensure(a)
    s = 1.0 / (1.0 + np.exp(-a.data))
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def relu(a) -> Tensor:
    a = _ensure(a)
    out = np.maximum(a.data, 0.0)
    return _make(out, (a,), lambda g: (g * (a.data > 0.0),))


def exp(a) -> Tensor:
    a = _ensure(a)
    e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,))


def log(a) -> Tensor:
    a = _ensure(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a) -> Tensor:
    a = _ensure(a)
    r = np.sqrt(a.data)
    return _make(r, (a,), lambda g: (g * 0.5 / r,))


def clip(a, lo: float, hi: float) -> Tensor:
    """Hard clip; gradient passes through only inside [lo, hi]."""
    a = _ensure(a)
    out = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(out, (a,), lambda g: (g * inside,))


def minimum(a, b) -> Tensor:
    a, b = _ensure(a), _ensure(b)
    take_a = a.data <= b.data
    out = np.where(take_a, a.data, b.data)
    return _make(out, (a, b), lambda g: (_unbroadcast(g * take_a, a.data.shape),
                                         _unbroadcast(g * ~take_a, b.data.shape)))


def sum_(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _ensure(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.data.shape).copy(),)

    return _make(out, (a,), backward)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _ensure(a)
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / n)


def concat(tensors: Iterable, axis: int = -1) -> Tensor:
    ts = [_ensure(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(out, ts, backward)


def stack(tensors: Iterable, axis: int = 0) -> Tensor:
    ts = [_ensure(t) for t in tensors]
    out = np.stack([t.data for t in ts], axis=axis)

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make(out, ts, backward)


def reshape(a, shape) -> Tensor:
    a = _ensure(a)
    out = a.data.reshape(shape)
    return _make(out, (a,), lambda g: (g.reshape(a.data.shape),))


def take(a, idx) -> Tensor:
    """Basic (view-style) indexing with gradient scatter-add."""
    a = _ensure(a)
    out = a.data[idx]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _make(np.array(out, copy=True), (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = _ensure(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * s).sum(axis=axis, keepdims=True)
        return (s * (g - dot),)

    return _make(s, (a,), backward)


def square(a) -> Tensor:
    a = _ensure(a)
    return mul(a, a)


def transpose(a) -> Tensor:
    a = _ensure(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose expects a 2-d tensor, got shape {a.data.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def softplus(a) -> Tensor:
    """log(1 + exp(x)), computed stably; derivative is sigmoid(x)."""
    a = _ensure(a)
    out = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))
    sig = 1.0 / (1.0 + np.exp(-a.data))
    return _make(out, (a,), lambda g: (g * sig,))


# -- parameter collections -----------------------------------------------------


def gradients(loss: Tensor, params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Backward over ``loss`` and collect gradients keyed like ``params``.

    Parameters the loss does not reach get zero gradients of matching shape.
    """
    for p in params.values():
        p.grad = None
    loss.backward()
    return {k: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for k, p in params.items()}

"""Dense float64 tensors with reverse-mode automatic differentiation.

Every model computation in this package runs through the `Tensor` class
below: a numpy array plus an optional autodiff record (operation tag and
parent references).  Calling ``backward()`` on a scalar loss walks the
recorded graph in reverse topological order and accumulates gradients
into every tensor with ``requires_grad=True``.

Everything is float64.  At the sizes this package targets, gradient-check
fidelity matters far more than speed.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.op: str = "leaf"
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, op={self.op!r})"

    # -- graph construction -------------------------------------------------

    @staticmethod
    def _make(data: np.ndarray, op: str, parents: Sequence["Tensor"],
              backward: Callable[[np.ndarray], None]) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.op = op
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def _accum(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Populate ``grad`` on every reachable tensor that requires it.

        Only defined for scalar (single-element) tensors.
        """
        if self.data.size != 1:
            raise ShapeError(
                f"backward() requires a scalar loss, got shape {self.data.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `g` down to `shape`, undoing numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- arithmetic ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def bw(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(g, b.shape))

    return Tensor._make(out_data, "add", (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data - b.data

    def bw(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(-g, b.shape))

    return Tensor._make(out_data, "sub", (a, b), bw)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(-a.data, "neg", (a,), lambda g: a._accum(-g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def bw(g):
        a._accum(_unbroadcast(g * b.data, a.shape))
        b._accum(_unbroadcast(g * a.data, b.shape))

    return Tensor._make(out_data, "mul", (a, b), bw)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data / b.data

    def bw(g):
        a._accum(_unbroadcast(g / b.data, a.shape))
        b._accum(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return Tensor._make(out_data, "div", (a, b), bw)


def power(a, p: float) -> Tensor:
    a = as_tensor(a)
    out_data = a.data ** p

    def bw(g):
        a._accum(g * p * a.data ** (p - 1))

    return Tensor._make(out_data, "pow", (a,), bw)


def matmul(a, b) -> Tensor:
    """Matrix product with numpy-style batching over leading dimensions."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs rank >= 2 operands, got {a.shape} x {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    out_data = np.matmul(a.data, b.data)

    def bw(g):
        a._accum(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        b._accum(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return Tensor._make(out_data, "matmul", (a, b), bw)


# -- pointwise nonlinearities -------------------------------------------------

def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)
    return Tensor._make(out_data, "exp", (a,), lambda g: a._accum(g * out_data))


def log(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._make(np.log(a.data), "log", (a,), lambda g: a._accum(g / a.data))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)
    return Tensor._make(out_data, "sqrt", (a,), lambda g: a._accum(g / (2.0 * out_data)))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)
    return Tensor._make(out_data, "tanh", (a,),
                        lambda g: a._accum(g * (1.0 - out_data * out_data)))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))
    return Tensor._make(out_data, "sigmoid", (a,),
                        lambda g: a._accum(g * out_data * (1.0 - out_data)))


def relu(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0)
    return Tensor._make(out_data, "relu", (a,),
                        lambda g: a._accum(g * (a.data > 0.0)))


# -- reductions ---------------------------------------------------------------

def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is None:
            a._accum(np.broadcast_to(g, a.shape))
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accum(np.broadcast_to(gg, a.shape))

    return Tensor._make(out_data, "sum", (a,), bw)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def maxpool(a, axis: int) -> Tensor:
    """Max along one axis; the gradient routes to the argmax position.

    Ties send the whole gradient to the lowest index.  An empty axis is an
    error, not a silent -inf.
    """
    a = as_tensor(a)
    if a.shape[axis] == 0:
        raise ShapeError(f"maxpool over empty axis {axis} of shape {a.shape}")
    out_data = a.data.max(axis=axis)
    idx = a.data.argmax(axis=axis)  # first occurrence == lowest index

    def bw(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, axis),
                          np.expand_dims(g, axis), axis)
        a._accum(full)

    return Tensor._make(out_data, "maxpool", (a,), bw)


# -- normalized distributions ---------------------------------------------

def softmax(a, axis: int = -1) -> Tensor:
    """Softmax along `axis`; the max is subtracted first so exp never overflows."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        a._accum(out_data * (g - dot))

    return Tensor._make(out_data, "softmax", (a,), bw)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - lse

    def bw(g):
        a._accum(g - np.exp(out_data) * g.sum(axis=axis, keepdims=True))

    return Tensor._make(out_data, "log_softmax", (a,), bw)


def layer_norm(x, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize over the last dimension, then scale and shift.

    Uses the population variance; composed from primitive ops so the
    backward pass falls out of the graph rather than a hand-derived formula.
    """
    x = as_tensor(x)
    mu = tmean(x, axis=-1, keepdims=True)
    centered = sub(x, mu)
    var = tmean(mul(centered, centered), axis=-1, keepdims=True)
    normed = div(centered, sqrt(add(var, eps)))
    return add(mul(normed, gain), bias)


# -- shape manipulation -----------------------------------------------------

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out_data = a.data.reshape(shape)
    return Tensor._make(out_data, "reshape", (a,),
                        lambda g: a._accum(g.reshape(a.shape)))


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)
    return Tensor._make(a.data.transpose(axes), "transpose", (a,),
                        lambda g: a._accum(g.transpose(inv)))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            t._accum(g[tuple(sl)])

    return Tensor._make(out_data, "concat", tuple(tensors), bw)


def split(a, sizes: Sequence[int], axis: int = 0) -> list[Tensor]:
    a = as_tensor(a)
    if sum(sizes) != a.shape[axis]:
        raise ShapeError(f"split sizes {sizes} do not cover axis {axis} of {a.shape}")
    outs = []
    lo = 0
    for size in sizes:
        hi = lo + size
        sl = [slice(None)] * a.ndim
        sl[axis] = slice(lo, hi)
        sl = tuple(sl)

        def bw(g, sl=sl):
            full = np.zeros_like(a.data)
            full[sl] = g
            a._accum(full)

        outs.append(Tensor._make(a.data[sl], "split", (a,), bw))
        lo = hi
    return outs


def embedding(table, ids) -> Tensor:
    """Row lookup into `table`; the backward pass scatter-adds into the rows."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    out_data = table.data[ids]

    def bw(g):
        full = np.zeros_like(table.data)
        np.add.at(full, ids, g)
        table._accum(full)

    return Tensor._make(out_data, "embedding", (table,), bw)


def dropout(a, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; a no-op when p == 0."""
    a = as_tensor(a)
    if p <= 0.0:
        return a
    keep = (rng.random(a.shape) >= p) / (1.0 - p)
    out_data = a.data * keep
    return Tensor._make(out_data, "dropout", (a,), lambda g: a._accum(g * keep))

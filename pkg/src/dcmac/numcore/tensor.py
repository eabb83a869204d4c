"""Reverse-mode autodiff over dense float64 numpy arrays.

The graph is built define-by-run: every op that touches a tensor requiring
gradients records a node with a backward closure. ``backward`` walks the
graph once, iteratively, so deep unrolls (long recurrent rollouts) do not
hit the interpreter recursion limit. Gradients accumulate into leaf
``.grad`` buffers until ``zero_grad`` resets them.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not conform for an op."""

    def __init__(self, op: str, *shapes: tuple):
        self.op = op
        self.shapes = shapes
        super().__init__(f"{op}: incompatible shapes {' vs '.join(str(s) for s in shapes)}")


class Node:
    """Backward-pass record: parent tensors and a closure mapping the
    output gradient to per-parent gradients (None for parents that do not
    require gradients)."""

    __slots__ = ("parents", "backward_fn")

    def __init__(self, parents: tuple, backward_fn: Callable[[np.ndarray], tuple]):
        self.parents = parents
        self.backward_fn = backward_fn


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.node: Node | None = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return stop_gradient(self)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

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

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return take(self, key)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        return tmean(self, axis=axis, keepdims=keepdims)


_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph construction inside the block (rollouts, evaluation)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


def as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad or p.node is not None for p in parents):
        out.node = Node(parents, backward_fn)
        out.requires_grad = True
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError("add", a.shape, b.shape) from None

    def backward_fn(g):
        ga = _unbroadcast(g, a.data.shape) if (a.requires_grad or a.node) else None
        gb = _unbroadcast(g, b.data.shape) if (b.requires_grad or b.node) else None
        return ga, gb

    return _make(data, (a, b), backward_fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError:
        raise ShapeError("sub", a.shape, b.shape) from None

    def backward_fn(g):
        ga = _unbroadcast(g, a.data.shape) if (a.requires_grad or a.node) else None
        gb = -_unbroadcast(g, b.data.shape) if (b.requires_grad or b.node) else None
        return ga, gb

    return _make(data, (a, b), backward_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError("mul", a.shape, b.shape) from None

    def backward_fn(g):
        ga = _unbroadcast(g * b.data, a.data.shape) if (a.requires_grad or a.node) else None
        gb = _unbroadcast(g * a.data, b.data.shape) if (b.requires_grad or b.node) else None
        return ga, gb

    return _make(data, (a, b), backward_fn)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data / b.data
    except ValueError:
        raise ShapeError("div", a.shape, b.shape) from None

    def backward_fn(g):
        ga = _unbroadcast(g / b.data, a.data.shape) if (a.requires_grad or a.node) else None
        gb = None
        if b.requires_grad or b.node:
            gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return _make(data, (a, b), backward_fn)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def backward_fn(g):
        return (-g,)

    return _make(-a.data, (a,), backward_fn)


def matmul(a, b) -> Tensor:
    """Matrix product following numpy semantics, including 1-D promotion
    and broadcasting over leading batch axes."""
    a, b = as_tensor(a), as_tensor(b)
    a_shape, b_shape = a.data.shape, b.data.shape
    ad = a.data[None, :] if a.data.ndim == 1 else a.data
    bd = b.data[:, None] if b.data.ndim == 1 else b.data
    try:
        prod = np.matmul(ad, bd)
    except ValueError:
        raise ShapeError("matmul", a_shape, b_shape) from None
    out_shape = list(prod.shape)
    if b.data.ndim == 1:
        out_shape = out_shape[:-1]
    if a.data.ndim == 1:
        out_shape = out_shape[:-2] + out_shape[-1:] if len(out_shape) >= 2 else []
    data = prod.reshape(out_shape)

    def backward_fn(g):
        gp = g.reshape(prod.shape)
        ga = gb = None
        if a.requires_grad or a.node:
            ga = _unbroadcast(np.matmul(gp, bd.swapaxes(-1, -2)), ad.shape).reshape(a_shape)
        if b.requires_grad or b.node:
            gb = _unbroadcast(np.matmul(ad.swapaxes(-1, -2), gp), bd.shape).reshape(b_shape)
        return ga, gb

    return _make(data, (a, b), backward_fn)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in tensors]) from None
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward_fn(g):
        gm = np.moveaxis(g, axis, 0)
        out = []
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad or t.node:
                out.append(np.moveaxis(gm[lo:hi], 0, axis))
            else:
                out.append(None)
        return tuple(out)

    return _make(data, tuple(tensors), backward_fn)


def take(a: Tensor, key) -> Tensor:
    """Basic slicing/indexing (no repeated elements); the backward pass
    accumulates into zeros at the sliced positions."""
    a = as_tensor(a)
    data = a.data[key]

    def backward_fn(g):
        ga = np.zeros_like(a.data)
        ga[key] += g
        return (ga,)

    return _make(np.array(data, copy=True), (a,), backward_fn)


def reshape(a: Tensor, shape: tuple) -> Tensor:
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, tuple(shape)) from None

    def backward_fn(g):
        return (g.reshape(a.data.shape),)

    return _make(data, (a,), backward_fn)


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)
    data = np.swapaxes(a.data, ax1, ax2)

    def backward_fn(g):
        return (np.swapaxes(g, ax1, ax2),)

    return _make(data, (a,), backward_fn)


def texp(a) -> Tensor:
    a = as_tensor(a)
    data = np.exp(a.data)

    def backward_fn(g):
        return (g * data,)

    return _make(data, (a,), backward_fn)


def tlog(a) -> Tensor:
    a = as_tensor(a)
    data = np.log(a.data)

    def backward_fn(g):
        return (g / a.data,)

    return _make(data, (a,), backward_fn)


def tabs(a) -> Tensor:
    a = as_tensor(a)
    data = np.abs(a.data)

    def backward_fn(g):
        return (g * np.sign(a.data),)

    return _make(data, (a,), backward_fn)


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    data = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward_fn(g):
        return (g * inside,)

    return _make(data, (a,), backward_fn)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk, a.data.shape).copy(),)

    return _make(data, (a,), backward_fn)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward_fn(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        gk = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gk / count, a.data.shape).copy(),)

    return _make(data, (a,), backward_fn)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def backward_fn(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return ((g - dot) * data,)

    return _make(data, (a,), backward_fn)


def stop_gradient(a: Tensor) -> Tensor:
    """Copy of ``a`` cut out of the graph; later in-place parameter updates
    cannot alias through it."""
    a = as_tensor(a)
    return Tensor(a.data.copy())


def zero_grad(params) -> None:
    """Reset gradient buffers to exact zeros so parameters untouched by the
    next backward pass report zero gradient rather than None."""
    for p in params:
        p.grad = np.zeros_like(p.data)


def backward(loss: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable leaf's ``.grad``.

    ``loss`` must be a scalar unless ``seed`` supplies the output gradient.
    """
    if seed is None:
        if loss.data.size != 1:
            raise ShapeError("backward", loss.shape)
        seed = np.ones_like(loss.data)
    else:
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != loss.data.shape:
            raise ShapeError("backward", loss.shape, seed.shape)
    if loss.node is None:
        if loss.requires_grad:
            loss.grad = (loss.grad if loss.grad is not None else 0.0) + seed
        return

    # Iterative depth-first topological order; recursion would overflow on
    # long recurrent unrolls.
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            topo.append(t)
            continue
        if id(t) in visited:
            continue
        visited.add(id(t))
        stack.append((t, True))
        if t.node is not None:
            for p in t.node.parents:
                if (p.requires_grad or p.node is not None) and id(p) not in visited:
                    stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): seed}
    for t in reversed(topo):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.node is None:
            if t.requires_grad:
                t.grad = g if t.grad is None else t.grad + g
            continue
        parent_grads = t.node.backward_fn(g)
        for p, pg in zip(t.node.parents, parent_grads):
            if pg is None or not (p.requires_grad or p.node is not None):
                continue
            prev = grads.get(id(p))
            grads[id(p)] = pg if prev is None else prev + pg

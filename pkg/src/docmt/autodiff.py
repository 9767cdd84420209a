"""Minimal tape-based reverse-mode differentiation over numpy arrays.

Only the operations the translation model needs are provided.  Every op
records its parents and a vector-Jacobian closure; ``backward`` walks the
tape in reverse topological order and accumulates gradients on every tensor
that requires them.  Inside ``no_grad()`` no tape is built, so the same
forward code doubles as the inference path.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple["Tensor", ...] = (),
        _vjp: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None,
    ) -> None:
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, grad={self.requires_grad})"


def param(data) -> Tensor:
    """A leaf that accumulates gradient."""
    return Tensor(data, requires_grad=True)


def const(data) -> Tensor:
    """A leaf outside the gradient graph."""
    return Tensor(data, requires_grad=False)


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], vjp) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=parents, _vjp=vjp)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _make(out, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return _make(out, (a, b), vjp)


def mul(a, b) -> Tensor:
    """Elementwise product; ``b`` may be a raw array or python scalar."""
    a = _as_tensor(a)
    if isinstance(b, Tensor):
        out = a.data * b.data

        def vjp(g):
            return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

        return _make(out, (a, b), vjp)
    factor = b

    def vjp_const(g):
        return (_unbroadcast(g * factor, a.data.shape),)

    return _make(a.data * factor, (a,), vjp_const)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = np.matmul(a.data, b.data)

    def vjp(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.data.shape), _unbroadcast(gb, b.data.shape)

    return _make(out, (a, b), vjp)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    out = table.data[ids]

    def vjp(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids.reshape(-1), g.reshape(-1, table.data.shape[-1]))
        return (grad,)

    return _make(out, (table,), vjp)


def take_last(x: Tensor, ids: np.ndarray) -> Tensor:
    """Gather along the last axis: out[..., i] = x[..., ids[...]]."""
    ids = np.asarray(ids)
    out = np.take_along_axis(x.data, ids[..., None], axis=-1)[..., 0]

    def vjp(g):
        grad = np.zeros_like(x.data)
        np.add.at(grad, (*np.indices(ids.shape), ids), g)
        return (grad,)

    return _make(out, (x,), vjp)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = x.data.reshape(shape)

    def vjp(g):
        return (g.reshape(x.data.shape),)

    return _make(out, (x,), vjp)


def transpose(x: Tensor, axes: tuple[int, ...]) -> Tensor:
    out = x.data.transpose(axes)
    inverse = tuple(np.argsort(axes))

    def vjp(g):
        return (g.transpose(inverse),)

    return _make(out, (x,), vjp)


def relu(x: Tensor) -> Tensor:
    out = np.maximum(x.data, 0)

    def vjp(g):
        return (g * (x.data > 0),)

    return _make(out, (x,), vjp)


def softmax_last(x: Tensor) -> Tensor:
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    s = exp / exp.sum(axis=-1, keepdims=True)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=-1, keepdims=True)),)

    return _make(s, (x,), vjp)


def log_softmax_last(x: Tensor) -> Tensor:
    m = x.data.max(axis=-1, keepdims=True)
    shifted = x.data - m
    logsum = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = shifted - logsum
    s = np.exp(out)

    def vjp(g):
        return (g - s * g.sum(axis=-1, keepdims=True),)

    return _make(out, (x,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    mean = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mean
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    xhat = centered * inv_std
    out = xhat * gain.data + bias.data

    def vjp(g):
        g_gain = _unbroadcast(g * xhat, gain.data.shape)
        g_bias = _unbroadcast(g, bias.data.shape)
        g_xhat = g * gain.data
        mean_g = g_xhat.mean(axis=-1, keepdims=True)
        mean_gx = (g_xhat * xhat).mean(axis=-1, keepdims=True)
        g_x = inv_std * (g_xhat - mean_g - xhat * mean_gx)
        return g_x, g_gain, g_bias

    return _make(out, (x, gain, bias), vjp)


def sum_all(x: Tensor) -> Tensor:
    out = np.asarray(x.data.sum(), dtype=x.data.dtype)

    def vjp(g):
        return (np.broadcast_to(g, x.data.shape).copy(),)

    return _make(out, (x,), vjp)


def sum_last(x: Tensor) -> Tensor:
    out = x.data.sum(axis=-1)

    def vjp(g):
        return (np.broadcast_to(g[..., None], x.data.shape).copy(),)

    return _make(out, (x,), vjp)


def backward(root: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate gradients of ``root`` into every tensor requiring grad."""
    if seed is None:
        seed = np.ones_like(root.data)
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    pending: dict[int, np.ndarray] = {id(root): np.asarray(seed, dtype=root.data.dtype)}
    for node in reversed(topo):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g if node.grad is None else node.grad + g
        if node._vjp is None:
            continue
        parent_grads = node._vjp(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            held = pending.get(id(parent))
            pending[id(parent)] = pg if held is None else held + pg

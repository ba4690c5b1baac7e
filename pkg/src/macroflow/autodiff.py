"""Minimal reverse-mode differentiation tape over dense numpy arrays.

Covers exactly the ops the velocity network needs (matmul, elementwise,
softmax variants, gather/scatter for edge aggregation). float64 throughout,
first-order only. Backward closures are recorded at op time, micrograd
style; `no_grad()` skips recording for inference.
"""

from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A numpy array plus the tape bookkeeping to backpropagate through it."""

    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents if _grad_enabled else ()
        self._backward = backward if _grad_enabled else None

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _wrap(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'set' if self.grad is not None else 'none'})"

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data + other.data, parents=(self, other))

        def backward(g):
            return _unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape)

        out._backward = backward
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, parents=(self,))
        out._backward = lambda g: (-g,)
        return out

    def __sub__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data - other.data, parents=(self, other))

        def backward(g):
            return _unbroadcast(g, self.data.shape), _unbroadcast(-g, other.data.shape)

        out._backward = backward
        return out

    def __rsub__(self, other):
        return Tensor._wrap(other) - self

    def __mul__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data * other.data, parents=(self, other))

        def backward(g):
            return (
                _unbroadcast(g * other.data, self.data.shape),
                _unbroadcast(g * self.data, other.data.shape),
            )

        out._backward = backward
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data / other.data, parents=(self, other))

        def backward(g):
            return (
                _unbroadcast(g / other.data, self.data.shape),
                _unbroadcast(-g * self.data / other.data**2, other.data.shape),
            )

        out._backward = backward
        return out

    def __pow__(self, exponent):
        assert np.isscalar(exponent), "only scalar exponents are supported"
        out = Tensor(self.data**exponent, parents=(self,))
        out._backward = lambda g: (g * exponent * self.data ** (exponent - 1),)
        return out

    def __matmul__(self, other):
        other = Tensor._wrap(other)
        out = Tensor(self.data @ other.data, parents=(self, other))

        def backward(g):
            ga = g @ other.data.swapaxes(-1, -2)
            gb = self.data.swapaxes(-1, -2) @ g
            return _unbroadcast(ga, self.data.shape), _unbroadcast(gb, other.data.shape)

        out._backward = backward
        return out

    # -- shape ops ------------------------------------------------------------

    def reshape(self, *shape):
        out = Tensor(self.data.reshape(*shape), parents=(self,))
        out._backward = lambda g: (g.reshape(self.data.shape),)
        return out

    def transpose(self, axes):
        inverse = np.argsort(axes)
        out = Tensor(self.data.transpose(axes), parents=(self,))
        out._backward = lambda g: (g.transpose(inverse),)
        return out

    def broadcast_to(self, shape):
        out = Tensor(np.broadcast_to(self.data, shape), parents=(self,))
        out._backward = lambda g: (_unbroadcast(g, self.data.shape),)
        return out

    def __getitem__(self, key):
        out = Tensor(self.data[key], parents=(self,))

        def backward(g):
            full = np.zeros_like(self.data)
            np.add.at(full, key, g)
            return (full,)

        out._backward = backward
        return out

    # -- reductions and elementwise -------------------------------------------

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,))

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.data.shape).copy(),)

        out._backward = backward
        return out

    def mean(self, axis=None, keepdims=False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / count

    def exp(self):
        out = Tensor(np.exp(self.data), parents=(self,))
        out._backward = lambda g: (g * out.data,)
        return out

    def log(self):
        out = Tensor(np.log(self.data), parents=(self,))
        out._backward = lambda g: (g / self.data,)
        return out

    def sqrt(self):
        out = Tensor(np.sqrt(self.data), parents=(self,))
        out._backward = lambda g: (g * 0.5 / out.data,)
        return out

    def tanh(self):
        out = Tensor(np.tanh(self.data), parents=(self,))
        out._backward = lambda g: (g * (1.0 - out.data**2),)
        return out

    def leaky_relu(self, slope: float = 0.2):
        out = Tensor(np.where(self.data > 0, self.data, slope * self.data), parents=(self,))
        out._backward = lambda g: (g * np.where(self.data > 0, 1.0, slope),)
        return out

    def softmax(self, axis: int = -1):
        shifted = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=axis, keepdims=True)
        out = Tensor(s, parents=(self,))

        def backward(g):
            dot = (g * s).sum(axis=axis, keepdims=True)
            return (s * (g - dot),)

        out._backward = backward
        return out

    # -- autodiff driver --------------------------------------------------------

    def backward(self, grad=None):
        """Backpropagate from this tensor; accumulates into `.grad` fields."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack = [(self, False)]
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
                if id(parent) not in seen:
                    stack.append((parent, False))

        grads: dict[int, np.ndarray] = {
            id(self): np.ones_like(self.data) if grad is None else np.asarray(grad, dtype=np.float64)
        }
        for node in reversed(topo):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.requires_grad:
                node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pg
                else:
                    grads[id(parent)] = pg


# -- free functions -------------------------------------------------------------


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [Tensor._wrap(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), parents=tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out._backward = lambda g: tuple(np.split(g, splits, axis=axis))
    return out


def gather_rows(t: Tensor, index: np.ndarray) -> Tensor:
    """Select rows along axis 0; duplicated indices accumulate in backward."""
    index = np.asarray(index, dtype=np.intp)
    out = Tensor(t.data[index], parents=(t,))

    def backward(g):
        full = np.zeros_like(t.data)
        np.add.at(full, index, g)
        return (full,)

    out._backward = backward
    return out


def segment_sum(t: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of t into `num_segments` buckets given per-row bucket ids."""
    segment_ids = np.asarray(segment_ids, dtype=np.intp)
    data = np.zeros((num_segments,) + t.data.shape[1:], dtype=np.float64)
    np.add.at(data, segment_ids, t.data)
    out = Tensor(data, parents=(t,))
    out._backward = lambda g: (g[segment_ids],)
    return out


def segment_softmax(logits: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Softmax of rows grouped by segment id (softmax over each node's edges)."""
    segment_ids = np.asarray(segment_ids, dtype=np.intp)
    shape = (num_segments,) + logits.data.shape[1:]
    seg_max = np.full(shape, -np.inf)
    np.maximum.at(seg_max, segment_ids, logits.data)
    e = np.exp(logits.data - seg_max[segment_ids])
    denom = np.zeros(shape, dtype=np.float64)
    np.add.at(denom, segment_ids, e)
    s = e / denom[segment_ids]
    out = Tensor(s, parents=(logits,))

    def backward(g):
        weighted = np.zeros(shape, dtype=np.float64)
        np.add.at(weighted, segment_ids, g * s)
        return (s * (g - weighted[segment_ids]),)

    out._backward = backward
    return out

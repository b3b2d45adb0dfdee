"""Tiny reverse-mode tape over numpy arrays.

Just enough operator coverage for the training losses: broadcasting
arithmetic, 2-d matmul/transpose, tanh, reductions and concatenation.
Gradients are exact to floating point for the composed graph.
"""
from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_vjp")

    # make numpy defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, value, parents=(), vjp=None):
        self.value = np.asarray(value, dtype=float)
        self.grad = None
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.value.shape

    # -- graph construction helpers ------------------------------------

    @staticmethod
    def _lift(other) -> "Tensor":
        return other if isinstance(other, Tensor) else Tensor(np.asarray(other, dtype=float))

    def __add__(self, other):
        other = self._lift(other)
        out = Tensor(self.value + other.value, (self, other))
        out._vjp = lambda g: (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.value, (self,))
        out._vjp = lambda g: (-g,)
        return out

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __mul__(self, other):
        other = self._lift(other)
        out = Tensor(self.value * other.value, (self, other))
        out._vjp = lambda g: (
            _unbroadcast(g * other.value, self.shape),
            _unbroadcast(g * self.value, other.shape),
        )
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported; multiply by a power")
        return self * (1.0 / np.asarray(other, dtype=float))

    def __pow__(self, exponent):
        p = float(exponent)
        out = Tensor(self.value**p, (self,))
        out._vjp = lambda g: (g * p * self.value ** (p - 1),)
        return out

    def __matmul__(self, other):
        other = self._lift(other)
        out = Tensor(self.value @ other.value, (self, other))
        out._vjp = lambda g: (g @ other.value.T, self.value.T @ g)
        return out

    def __rmatmul__(self, other):
        return self._lift(other) @ self

    @property
    def T(self):
        out = Tensor(self.value.T, (self,))
        out._vjp = lambda g: (g.T,)
        return out

    def tanh(self):
        y = np.tanh(self.value)
        out = Tensor(y, (self,))
        out._vjp = lambda g: (g * (1.0 - y * y),)
        return out

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.value.sum(axis=axis, keepdims=keepdims), (self,))

        def vjp(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, self.shape).copy(),)

        out._vjp = vjp
        return out

    def mean(self):
        n = self.value.size
        out = Tensor(self.value.mean(), (self,))
        out._vjp = lambda g: (np.full(self.shape, g / n),)
        return out

    def reshape(self, shape):
        out = Tensor(self.value.reshape(shape), (self,))
        out._vjp = lambda g: (g.reshape(self.shape),)
        return out

    # -- backward pass -------------------------------------------------

    def backward(self):
        if self.value.size != 1:
            raise ValueError("backward() expects a scalar loss")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                stack.append((p, False))
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._vjp is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._vjp(node.grad)):
                if parent.grad is None:
                    parent.grad = np.array(g, dtype=float, copy=True)
                else:
                    parent.grad = parent.grad + g


def concat(tensors, axis: int = 1) -> Tensor:
    """Concatenate tensors along an axis; gradient splits accordingly."""
    tensors = [Tensor._lift(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    out = Tensor(np.concatenate([t.value for t in tensors], axis=axis), tuple(tensors))
    splits = np.cumsum(sizes)[:-1]
    out._vjp = lambda g: tuple(np.split(g, splits, axis=axis))
    return out

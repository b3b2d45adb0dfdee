"""Feedforward networks: evaluation, input gradients, taped training graphs.

Architecture is the fixed template used throughout: L affine maps with tanh
on the hidden layers and identity output, preceded by a per-coordinate
affine renormalization of the inputs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autograd import Tensor, concat

STD_FLOOR = 1e-8


@dataclass
class Normalizer:
    """Per-coordinate input shift/scale applied before the first layer."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def fit_normalizer(x: np.ndarray) -> Normalizer:
    """Empirical per-coordinate mean/std, std floored at a small positive."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("expected a non-empty (batch, dim) array")
    std = np.maximum(x.std(axis=0), STD_FLOOR)
    return Normalizer(mean=x.mean(axis=0), std=std)


class Network:
    """Multilayer perceptron with ``n_layers`` affine maps of width ``width``."""

    def __init__(self, d_in, d_out, n_layers, width, weights, biases, normalizer=None):
        self.d_in = d_in
        self.d_out = d_out
        self.n_layers = n_layers
        self.width = width
        self.weights = weights  # list of (fan_in, fan_out) arrays
        self.biases = biases
        self.normalizer = normalizer or Normalizer.identity(d_in)

    # -- construction --------------------------------------------------

    @classmethod
    def create(cls, d_in: int, d_out: int, n_layers: int, width: int, seed) -> "Network":
        """Glorot-uniform weights, zero biases, identity normalizer."""
        if d_in < 1 or d_out < 1 or width < 1:
            raise ValueError("dimensions must be >= 1")
        if n_layers < 2:
            raise ValueError("need at least two affine layers")
        rng = np.random.Generator(np.random.Philox(seed))
        dims = [d_in] + [width] * (n_layers - 1) + [d_out]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(d_in, d_out, n_layers, width, weights, biases)

    def architecture(self) -> tuple:
        return (self.d_in, self.d_out, self.n_layers, self.width)

    def count_parameters(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    # -- evaluation ----------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ValueError(f"expected inputs of shape (batch, {self.d_in})")
        a = self.normalizer.apply(x)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w + b)
        return a @ self.weights[-1] + self.biases[-1]

    def input_gradient(self, x: np.ndarray) -> np.ndarray:
        """Exact Jacobian of forward w.r.t. x, shape (batch, d_out, d_in)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.d_in:
            raise ValueError(f"expected inputs of shape (batch, {self.d_in})")
        a = self.normalizer.apply(x)
        # forward-mode: carry d a / d x_raw, shape (batch, d_in, layer width)
        jac = np.broadcast_to(np.diag(1.0 / self.normalizer.std), (x.shape[0], self.d_in, self.d_in)).copy()
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ w + b)
            jac = (jac @ w) * (1.0 - a * a)[:, None, :]
        jac = jac @ self.weights[-1]
        return np.transpose(jac, (0, 2, 1))

    def stencil_gradient(self, x: np.ndarray, h: float) -> np.ndarray:
        """Central-difference Jacobian, shape (batch, d_out, d_in).

        The step is h per *normalized* coordinate, i.e. h * std_j in raw
        input units for coordinate j.
        """
        if not h > 0:
            raise ValueError("stencil step must be positive")
        x = np.asarray(x, dtype=float)
        batch = x.shape[0]
        out = np.empty((batch, self.d_out, self.d_in))
        for j in range(self.d_in):
            step = h * self.normalizer.std[j]
            bump = np.zeros(self.d_in)
            bump[j] = step
            out[:, :, j] = (self.forward(x + bump) - self.forward(x - bump)) / (2.0 * step)
        return out

    # -- parameter transfer / serialization ----------------------------

    def copy_parameters_from(self, source: "Network") -> None:
        """Copy parameter values (not the normalizer) from an identical net."""
        if source.architecture() != self.architecture():
            raise ValueError(
                f"architecture mismatch: {source.architecture()} vs {self.architecture()}"
            )
        self.weights = [w.copy() for w in source.weights]
        self.biases = [b.copy() for b in source.biases]

    def clone(self) -> "Network":
        net = Network(
            self.d_in,
            self.d_out,
            self.n_layers,
            self.width,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            Normalizer(self.normalizer.mean.copy(), self.normalizer.std.copy()),
        )
        return net

    def to_dict(self) -> dict:
        return {
            "d_in": self.d_in,
            "d_out": self.d_out,
            "n_layers": self.n_layers,
            "width": self.width,
            "normalizer_mean": self.normalizer.mean.tolist(),
            "normalizer_std": self.normalizer.std.tolist(),
            "parameters": np.concatenate([p.ravel() for p in self.parameters()]).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        net = cls.create(data["d_in"], data["d_out"], data["n_layers"], data["width"], 0)
        flat = np.asarray(data["parameters"], dtype=float)
        offset = 0
        for p in net.parameters():
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError("parameter count mismatch in serialized network")
        net.normalizer = Normalizer(
            mean=np.asarray(data["normalizer_mean"], dtype=float),
            std=np.asarray(data["normalizer_std"], dtype=float),
        )
        return net

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "Network":
        return cls.from_dict(json.loads(text))


def parameter_count(d_in: int, d_out: int, n_layers: int, width: int) -> int:
    """Closed form d0(1+m) + m(1+m)(L-2) + m(1+d1) for the template above."""
    return d_in * (1 + width) + width * (1 + width) * (n_layers - 2) + width * (1 + d_out)


class TapedNet:
    """Training-time view of a Network with parameters as tape leaves."""

    def __init__(self, net: Network):
        self.net = net
        self.weights = [Tensor(w) for w in net.weights]
        self.biases = [Tensor(b) for b in net.biases]

    def parameters(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def forward(self, x: np.ndarray) -> Tensor:
        a = self.net.normalizer.apply(np.asarray(x, dtype=float))
        out: Tensor | np.ndarray = a
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            out = (out @ w + b).tanh()
        return out @ self.weights[-1] + self.biases[-1]

    def _forward_activations(self, x: np.ndarray):
        a = self.net.normalizer.apply(np.asarray(x, dtype=float))
        acts = []
        out: Tensor | np.ndarray = a
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            out = (out @ w + b).tanh()
            acts.append(out)
        return (out @ self.weights[-1] + self.biases[-1]), acts

    def stencil_gradient(self, x: np.ndarray, h: float) -> Tensor:
        """Central differences of forward passes, shape (batch, d_in).

        Scalar-output networks only; parameter gradients flow through the
        stencil by ordinary reverse mode.
        """
        if self.net.d_out != 1:
            raise ValueError("stencil gradient is defined for scalar-output networks")
        x = np.asarray(x, dtype=float)
        cols = []
        for j in range(self.net.d_in):
            step = h * self.net.normalizer.std[j]
            bump = np.zeros(self.net.d_in)
            bump[j] = step
            cols.append((self.forward(x + bump) - self.forward(x - bump)) * (1.0 / (2.0 * step)))
        return concat(cols, axis=1)

    def exact_gradient(self, x: np.ndarray) -> Tensor:
        """Exact input gradient on the tape, shape (batch, d_in).

        Scalar-output networks only; usable inside a training loss as an
        alternative to the finite-difference stencil.
        """
        if self.net.d_out != 1:
            raise ValueError("exact gradient is defined for scalar-output networks")
        _, acts = self._forward_activations(x)
        sens = self.weights[-1].T  # (1, width)
        for w, a in zip(reversed(self.weights[:-1]), reversed(acts)):
            sens = (sens * (1.0 - a**2.0)) @ w.T
        return sens * (1.0 / self.net.normalizer.std)


class NonFiniteLoss(RuntimeError):
    """Raised when a training loss evaluates to NaN or infinity."""


def loss_param_gradient(nets, loss_fn):
    """Reverse-mode gradient of a scalar loss over one or more networks.

    ``loss_fn`` receives one TapedNet per network (in order) and must
    return a scalar Tensor built from taped operations.  Returns the loss
    value and, per network, the gradient list aligned with
    ``Network.parameters()``.
    """
    taped = [TapedNet(net) for net in nets]
    loss = loss_fn(*taped)
    value = float(loss.value)
    if not np.isfinite(value):
        raise NonFiniteLoss(f"loss is not finite: {value}")
    loss.backward()
    grads = []
    for tn in taped:
        grads.append(
            [p.grad if p.grad is not None else np.zeros_like(p.value) for p in tn.parameters()]
        )
    return value, grads

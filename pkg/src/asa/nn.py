"""Feed-forward network substrate: dense layers, backprop, SGD and the GRL.

All tensors are float64 numpy arrays. A batch is a 2-D array with one row per
frame. Layer weights are stored as ``(out_dim, in_dim)`` so a layer computes
``act(x @ W.T + b)``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError, TrainingDiverged

ACTIVATIONS = ("identity", "tanh", "relu", "sigmoid")

# log() arguments are clamped to at least this value everywhere.
LOG_EPS = 1e-12


def sigmoid(z: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_backward(probs: np.ndarray, grad_probs: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. softmax outputs back to the logits."""
    inner = np.sum(probs * grad_probs, axis=1, keepdims=True)
    return probs * (grad_probs - inner)


def _activate(name: str, z: np.ndarray) -> np.ndarray:
    if name == "identity":
        return z
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return sigmoid(z)
    raise ShapeError(f"unknown activation {name!r}")


def _activation_grad(name: str, z: np.ndarray, a: np.ndarray, g: np.ndarray) -> np.ndarray:
    if name == "identity":
        return g
    if name == "tanh":
        return g * (1.0 - a * a)
    if name == "relu":
        return g * (z > 0)
    if name == "sigmoid":
        return g * a * (1.0 - a)
    raise ShapeError(f"unknown activation {name!r}")


@dataclass
class DenseLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias shape {self.bias.shape} does not match weight shape {self.weight.shape}"
            )
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class Network:
    layers: list[DenseLayer]

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("a network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.in_dim != prev.out_dim:
                raise ShapeError(
                    f"layer chain broken: {prev.out_dim} outputs feed {nxt.in_dim} inputs"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def param_count(self) -> int:
        return sum(l.out_dim * (l.in_dim + 1) for l in self.layers)

    @property
    def activations(self) -> list[str]:
        return [l.activation for l in self.layers]

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays (not copies), in layer order: W0, b0, W1, b1, ..."""
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "Network":
        return copy.deepcopy(self)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, net: Network) -> "Gradients":
        return cls(
            [np.zeros_like(l.weight) for l in net.layers],
            [np.zeros_like(l.bias) for l in net.layers],
        )

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )

    def scaled(self, factor: float) -> "Gradients":
        return Gradients([factor * w for w in self.weights], [factor * b for b in self.biases])

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(a * a) for a in self.arrays())))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def as_batch(x, cols: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected a 2-D batch, got shape {x.shape}")
    if cols is not None and x.shape[1] != cols:
        raise ShapeError(f"expected {cols} columns, got {x.shape[1]}")
    return x


def forward(net: Network, batch) -> tuple[np.ndarray, ForwardCache]:
    x = as_batch(batch, net.input_dim)
    cache = ForwardCache()
    for layer in net.layers:
        z = x @ layer.weight.T + layer.bias
        a = _activate(layer.activation, z)
        cache.inputs.append(x)
        cache.pre.append(z)
        cache.post.append(a)
        x = a
    return x, cache


def backward(net: Network, cache: ForwardCache, grad_out) -> tuple[Gradients, np.ndarray]:
    """Backpropagate ``grad_out`` (dL/d output) through the cached forward pass."""
    if len(cache.post) != len(net.layers):
        raise ShapeError("cache does not belong to this network")
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != cache.post[-1].shape:
        raise ShapeError(f"grad_out shape {g.shape} != output shape {cache.post[-1].shape}")
    n = len(net.layers)
    dws: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    dbs: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in reversed(range(n)):
        layer = net.layers[i]
        dz = _activation_grad(layer.activation, cache.pre[i], cache.post[i], g)
        dws[i] = dz.T @ cache.inputs[i]
        dbs[i] = dz.sum(axis=0)
        g = dz @ layer.weight
    return Gradients(dws, dbs), g


def sgd_step(net: Network, grads: Gradients, mu: float) -> Network:
    """In-place update ``p <- p - mu * g`` for every parameter; returns ``net``."""
    if mu < 0:
        raise ShapeError(f"learning rate must be non-negative, got {mu}")
    if len(grads.weights) != len(net.layers):
        raise ShapeError("gradients do not match the network")
    if not grads.is_finite():
        raise TrainingDiverged("non-finite gradient entries")
    for layer, dw, db in zip(net.layers, grads.weights, grads.biases):
        if dw.shape != layer.weight.shape or db.shape != layer.bias.shape:
            raise ShapeError("gradients do not match the network")
        layer.weight -= mu * dw
        layer.bias -= mu * db
    return net


def grl_backward(grad_out, lam: float) -> np.ndarray:
    """Gradient reversal: the forward pass is the identity, backward scales by -lam."""
    if lam < 0:
        raise ShapeError(f"GRL weight must be non-negative, got {lam}")
    return -lam * np.asarray(grad_out, dtype=np.float64)


def grl_forward(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def init_network(sizes: Sequence[int], activations: Sequence[str] | str, seed: int) -> Network:
    """Glorot-uniform weights, zero biases.

    ``sizes`` lists every width including input and output, so ``[4, 8, 3]``
    is two layers. ``activations`` is one name per layer, or a single name
    used for all of them.
    """
    sizes = list(sizes)
    if len(sizes) < 2 or any(int(s) <= 0 for s in sizes):
        raise ShapeError(f"invalid layer sizes {sizes}")
    if isinstance(activations, str):
        activations = [activations] * (len(sizes) - 1)
    if len(activations) != len(sizes) - 1:
        raise ShapeError("need one activation per layer")
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), act))
    return Network(layers)

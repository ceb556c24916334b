"""Fully-connected ReLU networks: representation, forward pass and training.

Parameters are stored as float32 (the on-disk precision) and every forward
pass is evaluated in float64, so a network loaded from disk behaves exactly
like the one that was saved.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, ShapeError, TrainingDivergedError

log = logging.getLogger(__name__)

_INIT_STREAM = 0x1A17
_SHUFFLE_STREAM = 0x5EED


class Activation(enum.IntEnum):
    IDENTITY = 0
    RELU = 1


def _frozen(a, dtype=np.float32):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LinearLayer:
    """Affine map followed by an activation; ``weights[m]`` feeds output neuron ``m``."""

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.RELU

    def __post_init__(self):
        w = _frozen(self.weights)
        b = _frozen(self.bias)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ShapeError(f"inconsistent layer shapes: weights {w.shape}, bias {b.shape}")
        if min(w.shape) < 1:
            raise ShapeError(f"layer dimensions must be >= 1, got {w.shape}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def __eq__(self, other):
        if not isinstance(other, LinearLayer):
            return NotImplemented
        return (
            self.activation == other.activation
            and self.weights.shape == other.weights.shape
            and self.weights.tobytes() == other.weights.tobytes()
            and self.bias.tobytes() == other.bias.tobytes()
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Network:
    """An immutable stack of :class:`LinearLayer`. Equality is bitwise."""

    layers: tuple
    input_dim: int

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ShapeError("a network needs at least one layer")
        if self.input_dim < 1:
            raise ShapeError(f"input_dim must be >= 1, got {self.input_dim}")
        prev = self.input_dim
        for i, layer in enumerate(layers, start=1):
            if layer.in_dim != prev:
                raise ShapeError(f"layer {i} expects {layer.in_dim} inputs but receives {prev}")
            prev = layer.out_dim
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "input_dim", int(self.input_dim))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> list[int]:
        """``[input_dim, out_1, ..., out_L]``."""
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    @property
    def hidden_widths(self) -> list[int]:
        return [layer.out_dim for layer in self.layers[:-1]]

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return self.input_dim == other.input_dim and self.layers == other.layers

    __hash__ = None


def build_network(params: Sequence[tuple[np.ndarray, np.ndarray]]) -> Network:
    """Wrap ``(weights, bias)`` pairs as a network: ReLU on hidden layers, identity on the last."""
    n = len(params)
    layers = [
        LinearLayer(w, b, Activation.IDENTITY if i == n - 1 else Activation.RELU)
        for i, (w, b) in enumerate(params)
    ]
    return Network(tuple(layers), int(np.shape(params[0][0])[1]))


def init_network(arch: Sequence[int], seed: int) -> Network:
    """Seeded Kaiming-uniform initialisation (fan-in, ReLU gain); biases start at zero."""
    arch = [int(d) for d in arch]
    if len(arch) < 2 or min(arch) < 1:
        raise ShapeError(f"architecture needs >= 2 positive dimensions, got {arch}")
    rng = np.random.default_rng([int(seed), _INIT_STREAM])
    params = []
    for fan_in, fan_out in zip(arch[:-1], arch[1:]):
        bound = np.sqrt(6.0 / fan_in)
        params.append((rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out)))
    return build_network(params)


def _check_batch(net: Network, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"batch must be a 2-d matrix, got shape {x.shape}")
    if x.shape[1] != net.input_dim:
        raise ShapeError(f"layer 1 expects {net.input_dim} input features, batch has {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("batch contains non-finite entries")
    return x


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation == Activation.RELU:
        return np.maximum(z, 0.0)
    return z


def forward(net: Network, batch) -> list[np.ndarray]:
    """Post-activation outputs ``[x_1, ..., x_L]`` for an ``S x input_dim`` batch."""
    x = _check_batch(net, batch)
    outputs = []
    for layer in net.layers:
        z = x @ layer.weights.T.astype(np.float64) + layer.bias.astype(np.float64)
        x = _activate(z, layer.activation)
        outputs.append(x)
    return outputs


def logits(net: Network, batch) -> np.ndarray:
    return forward(net, batch)[-1]


# ---------------------------------------------------------------- training


@dataclass
class TrainConfig:
    epochs: int = 200
    initial_lr: float = 1e-3
    lr_decay_gamma: float = 0.99
    weight_decay: float = 1e-4
    batch_size: int = 128
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidInputError(f"epochs must be >= 0, got {self.epochs}")
        if self.initial_lr <= 0:
            raise InvalidInputError(f"initial_lr must be positive, got {self.initial_lr}")
        if not 0 < self.lr_decay_gamma <= 1:
            raise InvalidInputError(f"lr_decay_gamma must lie in (0, 1], got {self.lr_decay_gamma}")
        if self.weight_decay < 0:
            raise InvalidInputError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise InvalidInputError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


def loss_and_gradients(params, x, y):
    """Mean softmax cross-entropy over a batch and its gradient w.r.t. every parameter.

    ``params`` is a list of float64 ``(W, b)`` pairs; hidden layers use ReLU.
    Returns ``(loss, [(dW, db), ...])``.
    """
    acts = [x]
    h = x
    n_layers = len(params)
    for i, (w, b) in enumerate(params):
        z = h @ w.T + b
        h = z if i == n_layers - 1 else np.maximum(z, 0.0)
        acts.append(h)
    z = acts[-1]
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    n = x.shape[0]
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, y]))

    delta = np.exp(z - log_norm[:, None])
    delta[rows, y] -= 1.0
    delta /= n
    grads = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        w, _ = params[i]
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i:
            delta = (delta @ w) * (acts[i] > 0)
    return loss, grads


def _validate_training_data(arch, features, labels):
    if features.ndim != 2 or features.shape[0] == 0:
        raise InvalidInputError("training set is empty")
    if features.shape[0] != labels.shape[0]:
        raise InvalidInputError("features and labels disagree in length")
    if features.shape[1] != arch[0]:
        raise ShapeError(f"layer 1 expects {arch[0]} input features, data has {features.shape[1]}")
    if labels.min() < 0 or labels.max() >= arch[-1]:
        raise InvalidInputError(f"labels must lie in [0, {arch[-1]}), found range [{labels.min()}, {labels.max()}]")


def train(arch: Sequence[int], data, cfg: TrainConfig) -> Network:
    """Train a classifier with Adam, decoupled weight decay and per-epoch exponential LR decay.

    ``arch`` lists every layer dimension, input and output included. ``data``
    is anything exposing ``features`` and ``labels``. Deterministic in
    ``cfg.seed``: it fixes both the initialisation and the shuffling order.
    """
    arch = [int(d) for d in arch]
    features = np.asarray(data.features, dtype=np.float64)
    labels = np.asarray(data.labels, dtype=np.int64)
    net = init_network(arch, cfg.seed)
    _validate_training_data(arch, features, labels)
    if cfg.epochs == 0:
        return net

    params = [(l.weights.astype(np.float64), l.bias.astype(np.float64)) for l in net.layers]
    flat = [p for pair in params for p in pair]
    m1 = [np.zeros_like(p) for p in flat]
    m2 = [np.zeros_like(p) for p in flat]
    rng = np.random.default_rng([int(cfg.seed), _SHUFFLE_STREAM])
    n = features.shape[0]
    step = 0
    for epoch in range(cfg.epochs):
        lr = cfg.initial_lr * cfg.lr_decay_gamma**epoch
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = loss_and_gradients(params, features[idx], labels[idx])
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            total += loss * idx.size
            step += 1
            c1 = 1.0 - cfg.beta1**step
            c2 = 1.0 - cfg.beta2**step
            flat_grads = [g for pair in grads for g in pair]
            for p, g, a, v in zip(flat, flat_grads, m1, m2):
                p *= 1.0 - lr * cfg.weight_decay
                a *= cfg.beta1
                a += (1.0 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1.0 - cfg.beta2) * g * g
                p -= lr * (a / c1) / (np.sqrt(v / c2) + cfg.eps)
        log.debug("epoch %d lr %.3g loss %.4f", epoch, lr, total / n)
    return build_network(params)


def evaluate(net: Network, data) -> float:
    """Fraction of samples whose arg-max logit differs from the label."""
    labels = np.asarray(data.labels)
    if labels.size == 0:
        raise InvalidInputError("cannot evaluate on an empty dataset")
    pred = np.argmax(logits(net, data.features), axis=1)
    return float(np.count_nonzero(pred != labels)) / labels.size

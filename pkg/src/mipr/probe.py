"""Gaussian input intervention and the normalised activation trace it produces.

The network input is replaced by standard-normal noise, the noise is pushed
through every layer, and each recorded layer is min/max-scaled into [0, 1]
so that all joint histograms downstream share the same bin layout.
Activations are recorded at float32 precision, the precision of the trace
file, so an in-memory trace and its reloaded copy are identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ProbeError
from .network import Network, forward

_PROBE_STREAM = 0x9E0B
GRANULARITIES = ("neuron", "layer")


@dataclass(frozen=True)
class ProbeConfig:
    num_samples: int = 5000
    seed: int = 0
    granularity: str = "layer"

    def __post_init__(self):
        if self.num_samples < 2:
            raise InvalidInputError(f"num_samples must be >= 2, got {self.num_samples}")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.granularity not in GRANULARITIES:
            raise InvalidInputError(f"granularity must be one of {GRANULARITIES}, got {self.granularity!r}")


@dataclass(frozen=True, eq=False)
class ActivationTrace:
    """Normalised activations ``x_0 .. x_L`` plus the per-neuron ``(min, max)`` used to scale them.

    A neuron whose min equals its max is constant under the probe; its column
    is stored as 0.5.
    """

    layers: tuple
    ranges: tuple

    def __post_init__(self):
        layers = tuple(np.asarray(x, dtype=np.float32) for x in self.layers)
        ranges = tuple(np.asarray(r, dtype=np.float32) for r in self.ranges)
        if len(layers) < 2 or len(layers) != len(ranges):
            raise ValueError("a trace needs L+1 >= 2 layers with one range table each")
        samples = layers[0].shape[0]
        for i, (x, r) in enumerate(zip(layers, ranges)):
            if x.ndim != 2 or x.shape[0] != samples:
                raise ValueError(f"trace layer {i} has shape {x.shape}, expected ({samples}, dim)")
            if r.shape != (x.shape[1], 2):
                raise ValueError(f"trace layer {i} range table has shape {r.shape}")
            if x.size and (x.min() < 0.0 or x.max() > 1.0):
                raise ValueError(f"trace layer {i} holds values outside [0, 1]")
        for a in layers + ranges:
            a.setflags(write=False)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "ranges", ranges)

    @property
    def num_samples(self) -> int:
        return self.layers[0].shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers) - 1

    @property
    def dims(self) -> list[int]:
        return [x.shape[1] for x in self.layers]

    def constant(self, i: int) -> np.ndarray:
        """Boolean mask of the neurons of layer ``i`` that never changed under the probe."""
        r = self.ranges[i]
        return r[:, 0] == r[:, 1]

    def __eq__(self, other):
        if not isinstance(other, ActivationTrace):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.layers + self.ranges, other.layers + other.ranges)
        )

    __hash__ = None


def sample_intervention(input_dim: int, cfg: ProbeConfig) -> np.ndarray:
    """``S x input_dim`` i.i.d. standard-normal draws, deterministic in ``cfg.seed``."""
    if input_dim < 1:
        raise InvalidInputError(f"input_dim must be >= 1, got {input_dim}")
    rng = np.random.default_rng([int(cfg.seed), _PROBE_STREAM])
    return rng.standard_normal((cfg.num_samples, input_dim))


def compute_ranges(raw: np.ndarray, granularity: str = "layer") -> np.ndarray:
    """``(min, max)`` per neuron used to scale a recorded layer.

    With ``"layer"`` every neuron shares the layer-wide extremes, so bin width
    is the same absolute size across the layer; with ``"neuron"`` each column
    is stretched over its own extremes. Either way a constant neuron keeps its
    own degenerate ``(v, v)`` range so it stays flagged.
    """
    raw = np.asarray(raw, dtype=np.float32)
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    if granularity == "layer":
        live = lo != hi
        lo = np.where(live, raw.min(), lo)
        hi = np.where(live, raw.max(), hi)
    elif granularity != "neuron":
        raise InvalidInputError(f"unknown granularity {granularity!r}")
    return np.stack([lo, hi], axis=1).astype(np.float32)


def normalize(raw: np.ndarray, ranges: np.ndarray) -> np.ndarray:
    """Clamp columns to their stored ``[min, max]`` and map them linearly onto [0, 1].

    Constant columns map to 0.5.
    """
    raw = np.asarray(raw, dtype=np.float32).astype(np.float64)
    lo = ranges[:, 0].astype(np.float64)
    hi = ranges[:, 1].astype(np.float64)
    span = hi - lo
    flat = span == 0
    clipped = np.clip(raw, lo, hi)
    out = (clipped - lo) / np.where(flat, 1.0, span)
    out[:, flat] = 0.5
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def denormalize(values: np.ndarray, ranges: np.ndarray) -> np.ndarray:
    lo = ranges[:, 0].astype(np.float64)
    hi = ranges[:, 1].astype(np.float64)
    return lo + np.asarray(values, dtype=np.float64) * (hi - lo)


def record_trace(net: Network, cfg: ProbeConfig) -> ActivationTrace:
    x0 = sample_intervention(net.input_dim, cfg)
    raw_layers = [x0] + forward(net, x0)
    layers, ranges = [], []
    for i, raw in enumerate(raw_layers):
        bad = ~np.isfinite(raw)
        if bad.any():
            raise ProbeError(i, int(np.nonzero(bad.any(axis=0))[0][0]))
        raw32 = raw.astype(np.float32)
        if not np.all(np.isfinite(raw32)):
            raise ProbeError(i, int(np.nonzero(~np.isfinite(raw32).all(axis=0))[0][0]), "float32 overflow")
        r = compute_ranges(raw32, cfg.granularity)
        ranges.append(r)
        layers.append(normalize(raw32, r))
    return ActivationTrace(tuple(layers), tuple(ranges))

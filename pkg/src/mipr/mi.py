"""Plug-in mutual information between consecutive layers of an activation trace.

Every (input neuron, output neuron) pair of a layer gets a ``B x B`` joint
histogram over the normalised probe samples, and the MI of that histogram in
nats. Histogram probabilities are plain relative frequencies; empty cells
contribute nothing.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidInputError, RangeError
from .probe import ActivationTrace

RANGE_TOL = 1e-9


@dataclass(frozen=True)
class HistogramConfig:
    bins: int = 32

    def __post_init__(self):
        if self.bins < 2:
            raise InvalidInputError(f"bins must be >= 2, got {self.bins}")


@dataclass(frozen=True, eq=False)
class JointHistogram:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or (c < 0).any():
            raise InvalidInputError("counts must be a non-negative 2-d integer matrix")
        if int(c.sum()) != self.total or self.total < 1:
            raise InvalidInputError(f"counts sum to {int(c.sum())}, expected total {self.total}")
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_counts(cls, counts):
        c = np.asarray(counts, dtype=np.int64)
        return cls(c, int(c.sum()))

    def transpose(self) -> "JointHistogram":
        return JointHistogram(self.counts.T.copy(), self.total)


@dataclass(frozen=True, eq=False)
class MIMatrix:
    """``values[n, m]`` is the MI between input neuron ``n`` and output neuron ``m`` of layer ``layer_index``."""

    values: np.ndarray
    layer_index: int

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or not np.all(np.isfinite(v)):
            raise InvalidInputError("MI values must be a finite 2-d matrix")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, MIMatrix):
            return NotImplemented
        return (
            self.layer_index == other.layer_index
            and self.values.shape == other.values.shape
            and self.values.tobytes() == other.values.tobytes()
        )

    __hash__ = None


def bin_indices(values, bins: int) -> np.ndarray:
    """``min(floor(v * bins), bins - 1)`` for values in [0, 1] (1.0 lands in the last bin)."""
    v = np.asarray(values, dtype=np.float64)
    if v.size and (v.min() < -RANGE_TOL or v.max() > 1.0 + RANGE_TOL):
        raise RangeError(f"values must lie in [0, 1], found range [{v.min()!r}, {v.max()!r}]")
    idx = np.floor(np.clip(v, 0.0, 1.0) * bins).astype(np.int32)
    return np.minimum(idx, bins - 1)


def joint_histogram(x, y, cfg: HistogramConfig = HistogramConfig()) -> JointHistogram:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape or x.size == 0:
        raise InvalidInputError(f"x and y must be non-empty and equally long, got {x.size} and {y.size}")
    b = cfg.bins
    flat = bin_indices(x, b).astype(np.int64) * b + bin_indices(y, b)
    counts = np.bincount(flat, minlength=b * b).reshape(b, b)
    return JointHistogram(counts, x.size)


def mutual_information(h: JointHistogram) -> float:
    """Plug-in MI of a joint histogram, in nats, clamped at zero."""
    p = h.counts / h.total
    pu = p.sum(axis=1)
    pv = p.sum(axis=0)
    nz = p > 0
    denom = np.outer(pu, pv)
    mi = float(np.sum(p[nz] * np.log(p[nz] / denom[nz])))
    return max(mi, 0.0)


def entropy(counts) -> float:
    """Plug-in entropy in nats of a 1-d histogram."""
    c = np.asarray(counts, dtype=np.float64)
    p = c[c > 0] / c.sum()
    return float(-np.sum(p * np.log(p)))


def _column_bins(x: np.ndarray, bins: int) -> np.ndarray:
    return np.ascontiguousarray(bin_indices(x, bins).T, dtype=np.int32)


def layer_mi(
    trace: ActivationTrace,
    i: int,
    cfg: HistogramConfig = HistogramConfig(),
    workers: int = 1,
    block: int | None = None,
    backend: str | None = None,
) -> MIMatrix:
    """Per-connection MI between ``x_{i-1}`` and ``x_i`` of a trace (``1 <= i <= L``).

    Input columns are processed in blocks of ``block`` rows, optionally on a
    thread pool; every pair is computed independently, so the result does not
    depend on ``workers`` or ``block``. Neurons flagged constant in the trace
    get zero MI without histogramming.
    """
    if not 1 <= i <= trace.depth:
        raise InvalidInputError(f"layer index {i} out of range [1, {trace.depth}]")
    bx = _column_bins(trace.layers[i - 1], cfg.bins)
    by = _column_bins(trace.layers[i], cfg.bins)
    skip_x = np.ascontiguousarray(trace.constant(i - 1), dtype=np.uint8)
    skip_y = np.ascontiguousarray(trace.constant(i), dtype=np.uint8)
    n = bx.shape[0]
    if block is None:
        block = n if workers <= 1 else max(1, -(-n // (4 * workers)))
    spans = [(s, min(s + block, n)) for s in range(0, n, block)]

    def run(span):
        return _kernels.pairwise_mi(bx, by, cfg.bins, skip_x, skip_y, span[0], span[1], backend)

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, spans))
    else:
        parts = [run(s) for s in spans]
    return MIMatrix(np.vstack(parts), i)


def all_layer_mi(trace: ActivationTrace, cfg: HistogramConfig = HistogramConfig(), **kwargs) -> list[MIMatrix]:
    return [layer_mi(trace, i, cfg, **kwargs) for i in range(1, trace.depth + 1)]

"""Little-endian binary containers for models, probe traces, MI caches and datasets.

Layouts (all integers ``u32``, all reals little-endian IEEE):

* model   ``MIPR`` version L input_dim, per layer: out_dim, ``u8`` activation,
  weights ``f32[out_dim, in_dim]``, bias ``f32[out_dim]``
* trace   ``MIPT`` version S L, per layer 0..L: dim, ``f32`` (min, max) pairs per
  neuron, activations ``f32[S, dim]``
* MI      ``MIPM`` version L B S, per layer: N M, values ``f64[N, M]``
* dataset ``MIPD`` version num_samples dim num_classes, labels ``u32[num]``,
  features ``f32[num, dim]``
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import BadMagicError, DimensionError, FormatError, TruncatedFileError, VersionMismatchError

VERSION = 1
MODEL_MAGIC = b"MIPR"
TRACE_MAGIC = b"MIPT"
MI_MAGIC = b"MIPM"
DATASET_MAGIC = b"MIPD"

_U32 = struct.Struct("<I")


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int, what: str) -> bytes:
        end = self.pos + n
        if end > len(self.buf):
            raise TruncatedFileError(
                f"truncated while reading {what}: need {n} bytes at offset {self.pos}, "
                f"file has {len(self.buf)}",
                self.path,
            )
        chunk = self.buf[self.pos : end]
        self.pos = end
        return chunk

    def u32(self, what: str) -> int:
        return _U32.unpack(self.take(4, what))[0]

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]

    def array(self, dtype: str, shape, what: str) -> np.ndarray:
        dt = np.dtype(dtype)
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.take(count * dt.itemsize, what)
        return np.frombuffer(raw, dtype=dt).reshape(shape).copy()

    def header(self, magic: bytes):
        got = self.take(4, "magic")
        if got != magic:
            raise BadMagicError(f"bad magic {got!r}, expected {magic!r}", self.path)
        version = self.u32("version")
        if version != VERSION:
            raise VersionMismatchError(f"unsupported version {version}, expected {VERSION}", self.path)

    def finish(self):
        if self.pos != len(self.buf):
            raise FormatError(f"{len(self.buf) - self.pos} unexpected trailing bytes", self.path)


def _read(path) -> _Reader:
    with open(path, "rb") as fh:
        return _Reader(fh.read(), os.fspath(path))


def _u32(value: int) -> bytes:
    return _U32.pack(int(value))


def _write(path, chunks):
    with open(path, "wb") as fh:
        for chunk in chunks:
            fh.write(chunk)


# ------------------------------------------------------------------ models


def model_to_bytes(net) -> bytes:
    parts = [MODEL_MAGIC, _u32(VERSION), _u32(net.depth), _u32(net.input_dim)]
    for layer in net.layers:
        parts += [
            _u32(layer.out_dim),
            bytes([int(layer.activation)]),
            layer.weights.astype("<f4").tobytes(),
            layer.bias.astype("<f4").tobytes(),
        ]
    return b"".join(parts)


def save_model(net, path):
    _write(path, [model_to_bytes(net)])


def load_model(path):
    from .network import Activation, LinearLayer, Network

    r = _read(path)
    r.header(MODEL_MAGIC)
    depth = r.u32("layer count")
    input_dim = r.u32("input_dim")
    if depth < 1 or input_dim < 1:
        raise DimensionError(f"invalid network header: L={depth}, input_dim={input_dim}", r.path)
    layers = []
    in_dim = input_dim
    for i in range(1, depth + 1):
        out_dim = r.u32(f"layer {i} out_dim")
        if out_dim < 1:
            raise DimensionError(f"layer {i} has out_dim 0", r.path)
        code = r.u8(f"layer {i} activation")
        if code not in (0, 1):
            raise FormatError(f"layer {i} has unknown activation code {code}", r.path)
        w = r.array("<f4", (out_dim, in_dim), f"layer {i} weights")
        b = r.array("<f4", (out_dim,), f"layer {i} bias")
        layers.append(LinearLayer(w, b, Activation(code)))
        in_dim = out_dim
    r.finish()
    return Network(tuple(layers), input_dim)


# ------------------------------------------------------------------ traces


def save_trace(trace, path):
    parts = [TRACE_MAGIC, _u32(VERSION), _u32(trace.num_samples), _u32(trace.depth)]
    for x, rng in zip(trace.layers, trace.ranges):
        parts += [
            _u32(x.shape[1]),
            np.ascontiguousarray(rng, dtype="<f4").tobytes(),
            np.ascontiguousarray(x, dtype="<f4").tobytes(),
        ]
    _write(path, parts)


def load_trace(path):
    from .probe import ActivationTrace

    r = _read(path)
    r.header(TRACE_MAGIC)
    samples = r.u32("sample count")
    depth = r.u32("layer count")
    if samples < 1:
        raise DimensionError("trace holds no samples", r.path)
    layers, ranges = [], []
    for i in range(depth + 1):
        dim = r.u32(f"layer {i} dim")
        if dim < 1:
            raise DimensionError(f"trace layer {i} has dim 0", r.path)
        ranges.append(r.array("<f4", (dim, 2), f"layer {i} ranges").astype(np.float32))
        layers.append(r.array("<f4", (samples, dim), f"layer {i} activations").astype(np.float32))
    r.finish()
    try:
        return ActivationTrace(tuple(layers), tuple(ranges))
    except ValueError as exc:
        raise FormatError(str(exc), r.path) from exc


# --------------------------------------------------------------- MI caches


def save_mi(matrices, path, bins: int, num_samples: int):
    parts = [MI_MAGIC, _u32(VERSION), _u32(len(matrices)), _u32(bins), _u32(num_samples)]
    for mat in matrices:
        v = np.ascontiguousarray(mat.values, dtype="<f8")
        parts += [_u32(v.shape[0]), _u32(v.shape[1]), v.tobytes()]
    _write(path, parts)


def load_mi(path):
    """Returns ``(matrices, bins, num_samples)``."""
    from .mi import MIMatrix

    r = _read(path)
    r.header(MI_MAGIC)
    depth = r.u32("layer count")
    bins = r.u32("bin count")
    samples = r.u32("sample count")
    mats = []
    prev = None
    for i in range(1, depth + 1):
        n = r.u32(f"layer {i} N")
        m = r.u32(f"layer {i} M")
        if n < 1 or m < 1 or (prev is not None and n != prev):
            raise DimensionError(f"layer {i} has inconsistent shape {n}x{m}", r.path)
        mats.append(MIMatrix(r.array("<f8", (n, m), f"layer {i} values").astype(np.float64), i))
        prev = m
    r.finish()
    return mats, bins, samples


# ---------------------------------------------------------------- datasets


def save_dataset(data, path):
    feats = np.ascontiguousarray(data.features, dtype="<f4")
    labels = np.ascontiguousarray(data.labels, dtype="<u4")
    parts = [
        DATASET_MAGIC,
        _u32(VERSION),
        _u32(feats.shape[0]),
        _u32(feats.shape[1]),
        _u32(data.num_classes),
        labels.tobytes(),
        feats.tobytes(),
    ]
    _write(path, parts)


def load_dataset(path, split=None):
    from .data import Dataset, Split

    r = _read(path)
    r.header(DATASET_MAGIC)
    num = r.u32("sample count")
    dim = r.u32("feature dim")
    classes = r.u32("class count")
    if num == 0:
        raise DimensionError("dataset holds 0 samples", r.path)
    if dim == 0 or classes == 0:
        raise DimensionError(f"invalid dataset header: dim={dim}, classes={classes}", r.path)
    labels = r.array("<u4", (num,), "labels").astype(np.int64)
    feats = r.array("<f4", (num, dim), "features").astype(np.float32)
    r.finish()
    if labels.max() >= classes:
        raise DimensionError(f"label {labels.max()} out of range for {classes} classes", r.path)
    return Dataset(feats, labels, classes, split if split is not None else Split.TRAIN)

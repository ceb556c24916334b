"""Backend selection for the pairwise MI kernel.

The compiled extension is used when it imports; otherwise a vectorised numpy
implementation takes over. ``MIPR_BACKEND=python`` forces the fallback and
``MIPR_BACKEND=cython`` makes a missing extension an import error.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from . import _mi_ext
except ImportError:  # extension not built
    _mi_ext = None


def pairwise_mi_python(bx, by, bins, skip_x, skip_y, start, stop):
    samples = bx.shape[1]
    n_out = by.shape[0]
    nb = bins * bins
    offsets = (np.arange(n_out, dtype=np.int64) * nb)[:, None]
    by64 = by.astype(np.int64) + offsets
    out = np.zeros((stop - start, n_out), dtype=np.float64)
    inv = 1.0 / samples
    py = np.stack([np.bincount(row, minlength=bins) for row in by]) * inv
    live_y = ~skip_y.astype(bool)
    for n in range(start, stop):
        if skip_x[n]:
            continue
        px = np.bincount(bx[n], minlength=bins) * inv
        counts = np.bincount((by64 + bx[n].astype(np.int64) * bins).ravel(), minlength=n_out * nb)
        p = counts.reshape(n_out, bins, bins) * inv
        denom = px[None, :, None] * py[:, None, :]
        nz = p > 0
        terms = np.zeros_like(p)
        terms[nz] = p[nz] * np.log(p[nz] / denom[nz])
        row = np.maximum(terms.sum(axis=(1, 2)), 0.0)
        out[n - start] = np.where(live_y, row, 0.0)
    return out


def _select():
    choice = os.environ.get("MIPR_BACKEND", "auto").lower()
    if choice == "python":
        return "python"
    if choice == "cython":
        if _mi_ext is None:
            raise ImportError("MIPR_BACKEND=cython but the compiled extension is not built")
        return "cython"
    return "cython" if _mi_ext is not None else "python"


BACKEND = _select()


def available_backends():
    return ["python"] + (["cython"] if _mi_ext is not None else [])


def pairwise_mi(bx, by, bins, skip_x, skip_y, start, stop, backend=None):
    backend = backend or BACKEND
    if backend == "cython":
        if _mi_ext is None:
            raise ImportError("compiled MI kernel is not available")
        return _mi_ext.pairwise_mi(bx, by, bins, skip_x, skip_y, start, stop)
    if backend == "python":
        return pairwise_mi_python(bx, by, bins, skip_x, skip_y, start, stop)
    raise ValueError(f"unknown backend {backend!r}")

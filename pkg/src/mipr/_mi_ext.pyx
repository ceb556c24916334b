# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-connection histogram MI kernel."""

from libc.math cimport log
from libc.stdlib cimport calloc, free

import numpy as np


cdef double _pair_mi(const int* xb, const int* yb, Py_ssize_t samples, int bins,
                     const double* px, const double* py, int* counts) noexcept nogil:
    cdef Py_ssize_t s, u, v, nb = <Py_ssize_t>bins * bins
    cdef double p, pu, total = 0.0, inv = 1.0 / <double>samples
    for u in range(nb):
        counts[u] = 0
    for s in range(samples):
        counts[xb[s] * bins + yb[s]] += 1
    for u in range(bins):
        pu = px[u]
        if pu == 0.0:
            continue
        for v in range(bins):
            if counts[u * bins + v] == 0:
                continue
            p = counts[u * bins + v] * inv
            total += p * log(p / (pu * py[v]))
    return total if total > 0.0 else 0.0


def pairwise_mi(const int[:, ::1] bx, const int[:, ::1] by, int bins,
                const unsigned char[::1] skip_x, const unsigned char[::1] skip_y,
                Py_ssize_t start, Py_ssize_t stop):
    """MI in nats for input columns ``start:stop`` against every output column.

    ``bx`` (N x S) and ``by`` (M x S) hold precomputed bin indices, one row
    per neuron. Returns a ``(stop - start) x M`` float64 block.
    """
    cdef Py_ssize_t samples = bx.shape[1]
    cdef Py_ssize_t n_out = by.shape[0]
    cdef Py_ssize_t n, m, s
    cdef double inv = 1.0 / <double>samples
    out = np.zeros((stop - start, n_out), dtype=np.float64)
    cdef double[:, ::1] res = out
    cdef double[:, ::1] py = np.zeros((n_out, bins), dtype=np.float64)
    cdef double[::1] px = np.zeros(bins, dtype=np.float64)
    cdef int* counts = <int*>calloc(<size_t>bins * bins, sizeof(int))
    if counts == NULL:
        raise MemoryError()
    try:
        with nogil:
            for m in range(n_out):
                for s in range(samples):
                    py[m, by[m, s]] += 1.0
                for s in range(bins):
                    py[m, s] *= inv
            for n in range(start, stop):
                if skip_x[n]:
                    continue
                for s in range(bins):
                    px[s] = 0.0
                for s in range(samples):
                    px[bx[n, s]] += 1.0
                for s in range(bins):
                    px[s] *= inv
                for m in range(n_out):
                    if skip_y[m]:
                        continue
                    res[n - start, m] = _pair_mi(&bx[n, 0], &by[m, 0], samples, bins,
                                                 &px[0], &py[m, 0], counts)
    finally:
        free(counts)
    return out

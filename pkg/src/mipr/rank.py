"""Spearman and Kendall tau-b rank correlations with tie handling.

Both return ``nan`` when one side has no rank variance (e.g. a constant
score vector); callers treat that as a missing value.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInputError


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidInputError(f"score vectors differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise InvalidInputError("rank correlation needs at least two entries")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise InvalidInputError("score vectors must be finite")
    return a, b


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of the ranks they span."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    sx = x[order]
    ranks = np.empty(x.size)
    start = 0
    for end in range(1, x.size + 1):
        if end == x.size or sx[end] != sx[start]:
            ranks[order[start:end]] = (start + end + 1) / 2.0
            start = end
    return ranks


def spearman(a, b) -> float:
    a, b = _pair(a, b)
    ra = average_ranks(a)
    rb = average_ranks(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0.0:
        return math.nan
    return max(-1.0, min(1.0, float(np.dot(da, db)) / denom))


def kendall_tau(a, b) -> float:
    """Tie-corrected tau-b over all pairs."""
    a, b = _pair(a, b)
    iu = np.triu_indices(a.size, k=1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    n0 = sa.size
    ties_a = int(np.count_nonzero(sa == 0))
    ties_b = int(np.count_nonzero(sb == 0))
    denom = math.sqrt(float(n0 - ties_a) * float(n0 - ties_b))
    if denom == 0.0:
        return math.nan
    return max(-1.0, min(1.0, float(np.dot(sa, sb)) / denom))

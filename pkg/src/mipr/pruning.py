"""Neuron scoring, per-layer pruning plans and structural surgery.

Every scorer returns one vector per hidden layer where a lower score means
"remove first". Only hidden layers are ever pruned; the input and the output
layer keep all their neurons.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, InvalidPlanError, LayerEmptiedError, RangeError, ShapeError
from .mi import HistogramConfig, MIMatrix, all_layer_mi
from .network import LinearLayer, Network
from .probe import ActivationTrace, ProbeConfig, record_trace

_RANDOM_STREAM = 0x4A4D
# guards floor(rate * width) against products like 0.29 * 100 = 28.999999999999996
_COUNT_EPS = 1e-9


class Method(str, enum.Enum):
    MI = "mi"
    MAGNITUDE = "magnitude"
    RANDOM = "random"
    CORRELATION = "correlation"
    WEIGHT_SIMILARITY = "weight_similarity"


def schedule(max_rate: float, num_hidden: int) -> list[float]:
    """Per-hidden-layer rates growing linearly with depth, reaching ``max_rate`` at the last one."""
    if not 0.0 <= max_rate <= 1.0:
        raise RangeError(f"max_rate must lie in [0, 1], got {max_rate}")
    if num_hidden < 1:
        raise InvalidInputError(f"num_hidden must be >= 1, got {num_hidden}")
    return [max_rate * (h / num_hidden) for h in range(1, num_hidden + 1)]


def removal_count(rate: float, width: int) -> int:
    return int(math.floor(rate * width + _COUNT_EPS))


# ------------------------------------------------------------------ scorers


def mi_scores(mi: MIMatrix, keep=None) -> np.ndarray:
    """Sum of incoming-connection MI for each output neuron, ignoring inputs already pruned."""
    values = mi.values
    if keep is None:
        return values.sum(axis=0)
    keep = np.asarray(keep, dtype=bool)
    if keep.shape != (values.shape[0],):
        raise ShapeError(
            f"keep mask of length {keep.shape} does not match {values.shape[0]} inputs of layer {mi.layer_index}"
        )
    return np.where(keep[:, None], values, 0.0).sum(axis=0)


def score_mi(mi: Sequence[MIMatrix], masks=None) -> list[np.ndarray]:
    """Scores for every MI matrix given, with ``masks[i]`` the keep-vector over that matrix's inputs."""
    if masks is None:
        masks = [None] * len(mi)
    if len(masks) != len(mi):
        raise ShapeError(f"{len(masks)} masks for {len(mi)} MI matrices")
    return [mi_scores(m, k) for m, k in zip(mi, masks)]


def _scored_layers(net: Network, include_output: bool):
    return net.layers if include_output else net.layers[:-1]


def score_magnitude(net: Network, include_output: bool = False) -> list[np.ndarray]:
    """L2 norm of each neuron's incoming weight row."""
    return [
        np.linalg.norm(layer.weights.astype(np.float64), axis=1) for layer in _scored_layers(net, include_output)
    ]


def score_random(net: Network, seed: int, include_output: bool = False) -> list[np.ndarray]:
    rng = np.random.default_rng([int(seed), _RANDOM_STREAM])
    return [rng.random(layer.out_dim) for layer in _scored_layers(net, include_output)]


def correlation_scores(x: np.ndarray, constant=None) -> np.ndarray:
    """``1 - max |pearson|`` of each column against every other column.

    Constant columns score 0; they are skipped as partners of other columns.
    A column with no usable partner scores 1.
    """
    x = np.asarray(x, dtype=np.float64)
    width = x.shape[1]
    xc = x - x.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", xc, xc))
    flat = norms == 0
    if constant is not None:
        flat |= np.asarray(constant, dtype=bool)
    if width == 1:
        return np.where(flat, 0.0, 1.0)
    safe = np.where(flat, 1.0, norms)
    corr = np.abs((xc.T @ xc) / np.outer(safe, safe))
    corr = np.minimum(corr, 1.0)
    corr[:, flat] = 0.0
    np.fill_diagonal(corr, 0.0)
    scores = 1.0 - corr.max(axis=1)
    scores[flat] = 0.0
    return scores


def score_correlation(trace: ActivationTrace, include_output: bool = False) -> list[np.ndarray]:
    """Redundancy of each neuron measured on the probe trace (data-free stand-in for COP)."""
    last = trace.depth if include_output else trace.depth - 1
    return [correlation_scores(trace.layers[h], trace.constant(h)) for h in range(1, last + 1)]


def similarity_saliency(incoming: np.ndarray, outgoing: np.ndarray) -> np.ndarray:
    """``min_{j != m} |a_j|^2 * |w_m - w_j|^2`` for rows ``w`` of ``incoming`` and columns ``a`` of ``outgoing``."""
    w = np.asarray(incoming, dtype=np.float64)
    a_sq = np.sum(np.asarray(outgoing, dtype=np.float64) ** 2, axis=0)
    width = w.shape[0]
    if width == 1:
        return np.zeros(1)
    out = np.empty(width)
    for m in range(width):
        diff = np.sum((w - w[m]) ** 2, axis=1)
        cost = a_sq * diff
        cost[m] = np.inf
        out[m] = cost.min()
    return out


def score_weight_similarity(net: Network) -> list[np.ndarray]:
    """Single-shot pairwise-similarity saliency (DFP-style); incoming rows include the bias."""
    scores = []
    for layer, nxt in zip(net.layers[:-1], net.layers[1:]):
        incoming = np.hstack([layer.weights, layer.bias[:, None]])
        scores.append(similarity_saliency(incoming, nxt.weights))
    return scores


# -------------------------------------------------------------------- plans


@dataclass(frozen=True)
class PrunePlan:
    """``removals[h - 1]`` lists the neurons deleted from hidden layer ``h`` (sorted)."""

    per_layer_rate: tuple
    removals: tuple

    def __post_init__(self):
        object.__setattr__(self, "per_layer_rate", tuple(float(r) for r in self.per_layer_rate))
        object.__setattr__(self, "removals", tuple(tuple(int(i) for i in r) for r in self.removals))
        if len(self.per_layer_rate) != len(self.removals):
            raise InvalidPlanError("one rate per removal list is required")

    def keep_masks(self, widths: Sequence[int]) -> list[np.ndarray]:
        masks = []
        for width, rem in zip(widths, self.removals):
            keep = np.ones(width, dtype=bool)
            keep[list(rem)] = False
            masks.append(keep)
        return masks


def select_removals(scores, count: int) -> list[int]:
    """Indices of the ``count`` lowest scores; among equal scores the lower index goes first."""
    order = np.argsort(np.asarray(scores, dtype=np.float64), kind="stable")
    return sorted(int(i) for i in order[:count])


def _layer_removals(h: int, scores, rate: float) -> list[int]:
    if not 0.0 <= rate <= 1.0:
        raise RangeError(f"rate for hidden layer {h} must lie in [0, 1], got {rate}")
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError(f"non-finite scores in hidden layer {h}")
    k = removal_count(rate, scores.shape[0])
    if k >= scores.shape[0]:
        raise LayerEmptiedError(h, scores.shape[0])
    return select_removals(scores, k)


def make_plan(scores: Sequence, rates: Sequence[float]) -> PrunePlan:
    if len(scores) != len(rates):
        raise InvalidPlanError(f"{len(rates)} rates for {len(scores)} scored layers")
    removals = [_layer_removals(h, s, r) for h, (s, r) in enumerate(zip(scores, rates), start=1)]
    return PrunePlan(tuple(rates), tuple(removals))


def _validate_plan(net: Network, plan: PrunePlan):
    hidden = net.depth - 1
    if len(plan.removals) > hidden:
        raise InvalidPlanError(f"plan addresses layer {hidden + 1}, the output layer, which cannot be pruned")
    for h, rem in enumerate(plan.removals, start=1):
        width = net.layers[h - 1].out_dim
        if len(set(rem)) != len(rem):
            raise InvalidPlanError(f"hidden layer {h}: neuron listed twice in {list(rem)}")
        bad = [i for i in rem if not 0 <= i < width]
        if bad:
            raise InvalidPlanError(f"hidden layer {h}: indices {bad} out of range for width {width}")
        if len(rem) == width:
            raise LayerEmptiedError(h, width)


def apply_plan(net: Network, plan: PrunePlan) -> Network:
    """A new, smaller network with the planned hidden neurons deleted.

    A removed neuron loses its weight row and bias entry, and the following
    layer loses the matching weight column.
    """
    _validate_plan(net, plan)
    keeps = plan.keep_masks([layer.out_dim for layer in net.layers[: len(plan.removals)]])
    layers = []
    in_keep = None
    for i, layer in enumerate(net.layers):
        w, b = layer.weights, layer.bias
        if in_keep is not None:
            w = w[:, in_keep]
        out_keep = keeps[i] if i < len(keeps) else None
        if out_keep is not None:
            w, b = w[out_keep], b[out_keep]
        layers.append(LinearLayer(w, b, layer.activation))
        in_keep = out_keep
    return Network(tuple(layers), net.input_dim)


# ------------------------------------------------------------- end to end


@dataclass(frozen=True)
class PruneResult:
    network: Network
    plan: PrunePlan
    scores: list


def prune(
    net: Network,
    method,
    max_rate: float,
    trace: ActivationTrace | None = None,
    mi: Sequence[MIMatrix] | None = None,
    seed: int = 0,
    hist_cfg: HistogramConfig = HistogramConfig(),
    probe_cfg: ProbeConfig | None = None,
) -> PruneResult:
    """Score, plan and cut in one call.

    MI scoring runs shallow to deep: once a hidden layer's removals are known,
    its neurons are masked out of the next layer's incoming sums. Missing
    traces or MI caches are computed on demand from ``probe_cfg`` (seeded with
    ``seed`` by default).
    """
    method = Method(method)
    hidden = net.depth - 1
    if hidden < 1:
        raise InvalidInputError("network has no hidden layer to prune")
    rates = schedule(max_rate, hidden)

    def need_trace():
        return trace if trace is not None else record_trace(net, probe_cfg or ProbeConfig(seed=seed))

    if method is Method.MI:
        if mi is None:
            mi = all_layer_mi(need_trace(), hist_cfg)
        if len(mi) != net.depth or any(m.shape != (a, b) for m, a, b in zip(mi, net.dims[:-1], net.dims[1:])):
            raise ShapeError("MI matrices do not match the network's layer dimensions")
        scores, removals = [], []
        keep = None
        for h in range(1, hidden + 1):
            s = mi_scores(mi[h - 1], keep)
            rem = _layer_removals(h, s, rates[h - 1])
            scores.append(s)
            removals.append(rem)
            keep = np.ones(s.shape[0], dtype=bool)
            keep[rem] = False
        plan = PrunePlan(tuple(rates), tuple(removals))
    else:
        if method is Method.MAGNITUDE:
            scores = score_magnitude(net)
        elif method is Method.RANDOM:
            scores = score_random(net, seed)
        elif method is Method.CORRELATION:
            tr = need_trace()
            if tr.dims != net.dims:
                raise ShapeError("trace does not match the network's layer dimensions")
            scores = score_correlation(tr)
        else:
            scores = score_weight_similarity(net)
        plan = make_plan(scores, rates)
    return PruneResult(apply_plan(net, plan), plan, scores)


# ------------------------------------------------------------------ text io


def plan_to_text(plan: PrunePlan) -> str:
    lines = []
    for h, (rate, rem) in enumerate(zip(plan.per_layer_rate, plan.removals), start=1):
        idx = ",".join(str(i) for i in rem) or "-"
        lines.append(f"layer {h} remove {idx} rate {rate!r}")
    return "\n".join(lines) + "\n"


def plan_from_text(text: str) -> PrunePlan:
    rates, removals = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6 or parts[0] != "layer" or parts[2] != "remove" or parts[4] != "rate":
            raise InvalidPlanError(f"line {lineno}: expected 'layer <h> remove <idx,...> rate <r>'")
        h = int(parts[1])
        if h != len(rates) + 1:
            raise InvalidPlanError(f"line {lineno}: expected layer {len(rates) + 1}, got {h}")
        removals.append([] if parts[3] == "-" else [int(i) for i in parts[3].split(",")])
        rates.append(float(parts[5]))
    return PrunePlan(tuple(rates), tuple(removals))


def write_plan(plan: PrunePlan, path):
    with open(path, "w") as fh:
        fh.write(plan_to_text(plan))


def read_plan(path) -> PrunePlan:
    with open(path) as fh:
        return plan_from_text(fh.read())


def write_scores(path, method, scores):
    """Dump scores as CSV ``method,layer,neuron,score`` (layers numbered from 1)."""
    method = Method(method).value
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "layer", "neuron", "score"])
        for h, vec in enumerate(scores, start=1):
            for n, s in enumerate(vec):
                w.writerow([method, h, n, repr(float(s))])

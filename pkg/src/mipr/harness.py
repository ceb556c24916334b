"""Experiment orchestration: train, probe, score, prune and evaluate across a grid.

One network is trained per (architecture, seed) and then reused by every
(method, rate) cell, so method comparisons are paired. Results are plain
records that round-trip through CSV.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, MiprError
from .mi import HistogramConfig, MIMatrix, all_layer_mi
from .network import Network, TrainConfig, evaluate, train
from .probe import ActivationTrace, ProbeConfig, record_trace
from .pruning import Method, mi_scores, prune, score_magnitude
from .rank import kendall_tau, spearman

log = logging.getLogger(__name__)

RESULT_FIELDS = ["arch", "hidden_layers", "width", "method", "max_rate", "seed", "test_error", "baseline_error"]
RANK_FIELDS = ["layer", "metric", "mean", "std"]
SUMMARY_FIELDS = ["method", "max_rate", "mean_error", "std_error", "count"]
BASELINE = "none"


@dataclass
class ExperimentSpec:
    architectures: list = field(default_factory=lambda: [(1, 64)])
    methods: list = field(default_factory=lambda: [m.value for m in Method])
    max_rates: list = field(default_factory=lambda: [0.1, 0.3, 0.5])
    seeds: list = field(default_factory=lambda: [0, 1, 2])

    def __post_init__(self):
        self.architectures = [(int(h), int(w)) for h, w in self.architectures]
        self.methods = [Method(m).value for m in self.methods]
        self.max_rates = [float(r) for r in self.max_rates]
        self.seeds = [int(s) for s in self.seeds]
        for name in ("architectures", "methods", "max_rates", "seeds"):
            if not getattr(self, name):
                raise InvalidInputError(f"experiment {name} must not be empty")
        if any(not 0.0 <= r <= 1.0 for r in self.max_rates):
            raise InvalidInputError(f"max_rates must lie in [0, 1], got {self.max_rates}")
        if any(h < 1 or w < 1 for h, w in self.architectures):
            raise InvalidInputError(f"architectures need >= 1 hidden layer and width, got {self.architectures}")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))


@dataclass(frozen=True)
class ExperimentRecord:
    arch: str
    hidden_layers: int
    width: int
    method: str
    max_rate: float
    seed: int
    test_error: float
    baseline_error: float

    def row(self):
        return [
            self.arch,
            self.hidden_layers,
            self.width,
            self.method,
            repr(self.max_rate),
            self.seed,
            repr(self.test_error),
            repr(self.baseline_error),
        ]

    @classmethod
    def from_row(cls, row: dict):
        return cls(
            row["arch"],
            int(row["hidden_layers"]),
            int(row["width"]),
            row["method"],
            float(row["max_rate"]),
            int(row["seed"]),
            float(row["test_error"]),
            float(row["baseline_error"]),
        )


@dataclass
class ExperimentResult:
    records: list
    failures: list = field(default_factory=list)


def arch_name(hidden_layers: int, width: int) -> str:
    return f"{hidden_layers}x{width}"


def layer_dims(hidden_layers: int, width: int, input_dim: int, num_classes: int) -> list[int]:
    return [input_dim] + [width] * hidden_layers + [num_classes]


def _run_unit(spec, arch, seed, train_data, test_data, train_cfg, probe_cfg, hist_cfg):
    hidden, width = arch
    name = arch_name(hidden, width)
    records, failures = [], []
    try:
        net = train(layer_dims(hidden, width, train_data.dim, train_data.num_classes), train_data, replace(train_cfg, seed=seed))
        baseline = evaluate(net, test_data)
        trace = mi = None
        methods = set(spec.methods)
        if methods & {Method.MI.value, Method.CORRELATION.value}:
            trace = record_trace(net, replace(probe_cfg, seed=seed))
        if Method.MI.value in methods:
            mi = all_layer_mi(trace, hist_cfg)
    except MiprError as exc:
        log.warning("unit %s seed %d failed: %s", name, seed, exc)
        return records, [(name, None, None, seed, str(exc))]
    records.append(ExperimentRecord(name, hidden, width, BASELINE, 0.0, seed, baseline, baseline))
    for method in spec.methods:
        for rate in spec.max_rates:
            try:
                result = prune(net, method, rate, trace=trace, mi=mi, seed=seed, hist_cfg=hist_cfg)
                err = evaluate(result.network, test_data)
            except MiprError as exc:
                log.warning("cell %s %s rate %s seed %d failed: %s", name, method, rate, seed, exc)
                failures.append((name, method, rate, seed, str(exc)))
                continue
            records.append(ExperimentRecord(name, hidden, width, method, rate, seed, err, baseline))
    log.info("finished %s seed %d (baseline error %.4f)", name, seed, baseline)
    return records, failures


def run_experiment(
    spec: ExperimentSpec,
    train_data,
    test_data,
    train_cfg: TrainConfig = TrainConfig(),
    probe_cfg: ProbeConfig = ProbeConfig(),
    hist_cfg: HistogramConfig = HistogramConfig(),
    sink: Callable[[ExperimentRecord], None] | None = None,
    jobs: int = 1,
) -> ExperimentResult:
    """Run every (architecture, seed) unit and every (method, rate) cell within it.

    ``sink`` receives records as soon as their unit finishes. The returned
    records are always in grid order, whatever ``jobs`` is.
    """
    units = [(arch, seed) for arch in spec.architectures for seed in spec.seeds]
    args = [(spec, arch, seed, train_data, test_data, train_cfg, probe_cfg, hist_cfg) for arch, seed in units]
    outputs = [None] * len(units)
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_run_unit, *a): i for i, a in enumerate(args)}
            for fut in as_completed(futures):
                i = futures[fut]
                outputs[i] = fut.result()
                if sink:
                    for rec in outputs[i][0]:
                        sink(rec)
    else:
        for i, a in enumerate(args):
            outputs[i] = _run_unit(*a)
            if sink:
                for rec in outputs[i][0]:
                    sink(rec)
    result = ExperimentResult([], [])
    for recs, fails in outputs:
        result.records.extend(recs)
        result.failures.extend(fails)
    return result


# --------------------------------------------------------------------- csv


class ResultWriter:
    """Appends result rows to a CSV file, flushing after each one."""

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(RESULT_FIELDS)
        self._fh.flush()

    def __call__(self, record: ExperimentRecord):
        self._w.writerow(record.row())
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_results(path, records: Sequence[ExperimentRecord]):
    with ResultWriter(path) as w:
        for rec in records:
            w(rec)


def read_results(path) -> list[ExperimentRecord]:
    with open(path, newline="") as fh:
        return [ExperimentRecord.from_row(row) for row in csv.DictReader(fh)]


def summarize(records: Sequence[ExperimentRecord]) -> list[dict]:
    """Mean and standard deviation of test error per (method, max_rate), over architectures and seeds."""
    groups: dict = {}
    for rec in records:
        groups.setdefault((rec.method, rec.max_rate), []).append(rec.test_error)
    order = {BASELINE: -1, **{m.value: i for i, m in enumerate(Method)}}
    rows = []
    for (method, rate), errs in sorted(groups.items(), key=lambda kv: (order.get(kv[0][0], 99), kv[0][1])):
        e = np.asarray(errs)
        rows.append({"method": method, "max_rate": rate, "mean_error": float(e.mean()), "std_error": float(e.std()), "count": e.size})
    return rows


def write_summary(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for r in rows:
            w.writerow([r["method"], repr(r["max_rate"]), repr(r["mean_error"]), repr(r["std_error"]), r["count"]])


# -------------------------------------------------------- rank similarity


@dataclass(frozen=True)
class RankRow:
    layer: int
    metric: str
    mean: float
    std: float


def layer_rank_similarity(a_scores, b_scores) -> list[tuple[float, float]]:
    """(spearman, kendall tau-b) for each pair of per-layer score vectors; ``nan`` where undefined."""
    out = []
    for a, b in zip(a_scores, b_scores):
        if len(a) < 2:
            out.append((math.nan, math.nan))
        else:
            out.append((spearman(a, b), kendall_tau(a, b)))
    return out


def _mean_std(values):
    v = np.asarray([x for x in values if not math.isnan(x)])
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std())


def rank_similarity_report(
    net: Network,
    traces: ActivationTrace | Sequence[ActivationTrace] | None = None,
    mis: Sequence | None = None,
    hist_cfg: HistogramConfig = HistogramConfig(),
) -> list[RankRow]:
    """Spearman and Kendall tau-b between MI scores and weight-magnitude scores, per layer.

    Covers every hidden layer and the output layer. Pass several traces (or
    several MI caches) to get mean and standard deviation over probe seeds;
    correlations that are undefined in a run are skipped, and a layer with no
    defined value reports ``nan``.
    """
    if isinstance(traces, ActivationTrace):
        traces = [traces]
    if mis is not None and mis and isinstance(mis[0], MIMatrix):
        mis = [mis]
    if mis is None:
        if not traces:
            raise InvalidInputError("need at least one trace or MI cache")
        mis = [all_layer_mi(t, hist_cfg) for t in traces]
    magnitude = score_magnitude(net, include_output=True)
    per_run = [layer_rank_similarity([mi_scores(m) for m in run], magnitude) for run in mis]
    rows = []
    for layer in range(net.depth):
        for k, metric in enumerate(("spearman", "kendall")):
            mean, std = _mean_std([run[layer][k] for run in per_run])
            rows.append(RankRow(layer + 1, metric, mean, std))
    return rows


def _fmt(x: float) -> str:
    return "" if math.isnan(x) else repr(x)


def write_rank_report(path, rows: Sequence[RankRow]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RANK_FIELDS)
        for r in rows:
            w.writerow([r.layer, r.metric, _fmt(r.mean), _fmt(r.std)])


def read_rank_report(path) -> list[RankRow]:
    def num(s):
        return math.nan if s == "" else float(s)

    with open(path, newline="") as fh:
        return [RankRow(int(r["layer"]), r["metric"], num(r["mean"]), num(r["std"])) for r in csv.DictReader(fh)]

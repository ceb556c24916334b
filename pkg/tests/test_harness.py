import math

import numpy as np
import pytest

from conftest import random_net
from mipr.data import make_synthetic
from mipr.errors import InvalidInputError
from mipr.harness import (
    BASELINE,
    ExperimentRecord,
    ExperimentSpec,
    RankRow,
    arch_name,
    layer_rank_similarity,
    rank_similarity_report,
    read_rank_report,
    read_results,
    run_experiment,
    summarize,
    write_rank_report,
    write_results,
    write_summary,
)
from mipr.mi import HistogramConfig
from mipr.network import Activation, LinearLayer, Network, TrainConfig
from mipr.probe import ProbeConfig, record_trace

TCFG = TrainConfig(epochs=3, initial_lr=1e-2, batch_size=32)
PCFG = ProbeConfig(num_samples=300)


@pytest.fixture(scope="module")
def data():
    return make_synthetic(4, 8, 40, 3.0, seed=0)


def _run(data, **kw):
    spec = ExperimentSpec(**{"architectures": [(2, 8)], "max_rates": [0.0, 0.5], "seeds": [0], **kw})
    return run_experiment(spec, *data, TCFG, PCFG, HistogramConfig(8))


def test_grid_cardinality(data):
    res = _run(data, seeds=[0, 1])
    # per seed: baseline + 5 methods x 2 rates
    assert len(res.records) == 2 * (1 + 5 * 2)
    assert res.failures == []
    assert sum(r.method == BASELINE for r in res.records) == 2


def test_rate_zero_equals_baseline(data):
    for rec in _run(data).records:
        if rec.max_rate == 0.0:
            assert rec.test_error == rec.baseline_error


def test_deterministic(data):
    assert _run(data).records == _run(data).records


def test_cells_are_independent(data):
    full = _run(data)
    solo = _run(data, methods=["magnitude"], max_rates=[0.5])
    match = [r for r in full.records if r.method == "magnitude" and r.max_rate == 0.5]
    assert match == [r for r in solo.records if r.method != BASELINE]


def test_parallel_jobs_same_order(data):
    spec = ExperimentSpec([(1, 8)], ["magnitude", "random"], [0.3], [0, 1])
    seq = run_experiment(spec, *data, TCFG, PCFG, HistogramConfig(8))
    par = run_experiment(spec, *data, TCFG, PCFG, HistogramConfig(8), jobs=2)
    assert seq.records == par.records


def test_sink_sees_every_record(data):
    seen = []
    spec = ExperimentSpec([(1, 8)], ["random"], [0.3], [0])
    res = run_experiment(spec, *data, TCFG, PCFG, HistogramConfig(8), sink=seen.append)
    assert seen == res.records


def test_emptied_layer_recorded_as_failure(data):
    spec = ExperimentSpec([(1, 1)], ["random"], [1.0], [0])
    res = run_experiment(spec, *data, TCFG, PCFG, HistogramConfig(8))
    assert len(res.failures) == 1 and res.failures[0][1] == "random"
    assert [r.method for r in res.records] == [BASELINE]


def test_csv_round_trip(tmp_path, data):
    recs = _run(data).records
    write_results(tmp_path / "r.csv", recs)
    assert read_results(tmp_path / "r.csv") == recs
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "arch,hidden_layers,width,method,max_rate,seed,test_error,baseline_error"


def test_summary():
    recs = [ExperimentRecord("1x4", 1, 4, "mi", 0.3, s, e, 0.1) for s, e in enumerate([0.1, 0.3])]
    rows = summarize(recs)
    assert rows == [{"method": "mi", "max_rate": 0.3, "mean_error": 0.2, "std_error": pytest.approx(0.1), "count": 2}]


def test_summary_file(tmp_path):
    write_summary(tmp_path / "s.csv", summarize([ExperimentRecord("1x4", 1, 4, "random", 0.5, 0, 0.25, 0.1)]))
    assert (tmp_path / "s.csv").read_text() == "method,max_rate,mean_error,std_error,count\nrandom,0.5,0.25,0.0,1\n"


def test_spec_validation(tmp_path):
    with pytest.raises(InvalidInputError):
        ExperimentSpec(max_rates=[1.5])
    with pytest.raises(ValueError):
        ExperimentSpec(methods=["bogus"])
    (tmp_path / "s.json").write_text('{"architectures": [[1, 16]], "seeds": [4]}')
    spec = ExperimentSpec.from_json(tmp_path / "s.json")
    assert spec.architectures == [(1, 16)] and spec.seeds == [4]
    assert arch_name(3, 16) == "3x16"


class TestRankReport:
    def test_self_similarity(self):
        a = [np.array([0.1, 0.5, 0.3])]
        assert layer_rank_similarity(a, a) == [(1.0, 1.0)]

    def test_covers_output_layer(self, rng):
        net = random_net(rng, [4, 6, 5, 3])
        rows = rank_similarity_report(net, record_trace(net, PCFG), hist_cfg=HistogramConfig(8))
        assert [(r.layer, r.metric) for r in rows] == [(l, m) for l in (1, 2, 3) for m in ("spearman", "kendall")]
        assert all(r.std == 0.0 for r in rows if not math.isnan(r.mean))

    def test_multiple_seeds(self, rng):
        net = random_net(rng, [4, 6, 3])
        traces = [record_trace(net, ProbeConfig(num_samples=300, seed=s)) for s in range(3)]
        rows = rank_similarity_report(net, traces, hist_cfg=HistogramConfig(8))
        assert all(-1 <= r.mean <= 1 and r.std >= 0 for r in rows)

    def test_constant_layer_nan_written_empty(self, tmp_path):
        # all hidden neurons dead -> constant MI scores
        l1 = LinearLayer(np.zeros((3, 2)), np.zeros(3), Activation.RELU)
        l2 = LinearLayer(np.arange(6.0).reshape(2, 3), np.zeros(2), Activation.IDENTITY)
        net = Network((l1, l2), 2)
        rows = rank_similarity_report(net, record_trace(net, PCFG))
        assert math.isnan(rows[0].mean)
        write_rank_report(tmp_path / "r.csv", rows)
        assert "1,spearman,," in (tmp_path / "r.csv").read_text()
        back = read_rank_report(tmp_path / "r.csv")
        assert math.isnan(back[0].mean) and back[0].layer == 1

    def test_requires_input(self, rng):
        with pytest.raises(InvalidInputError):
            rank_similarity_report(random_net(rng, [2, 3, 2]))

    def test_rank_row_round_trip(self, tmp_path):
        rows = [RankRow(1, "spearman", 0.25, 0.0), RankRow(1, "kendall", -0.5, 0.125)]
        write_rank_report(tmp_path / "r.csv", rows)
        assert read_rank_report(tmp_path / "r.csv") == rows

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import identity_net, random_net
from oracles import entropy_scalar, histogram_scalar, mi_double_loop
from mipr import _kernels
from mipr.errors import InvalidInputError, RangeError
from mipr.mi import (
    HistogramConfig,
    JointHistogram,
    all_layer_mi,
    entropy,
    joint_histogram,
    layer_mi,
    mutual_information,
)
from mipr.network import Activation, LinearLayer, Network
from mipr.probe import ActivationTrace, ProbeConfig, record_trace


def trace_from(*layers):
    """Trace over hand-written [0, 1] data; a column is flagged constant iff it is constant."""
    layers = [np.asarray(x, dtype=np.float32) for x in layers]
    ranges = [np.stack([x.min(axis=0), x.max(axis=0)], axis=1) for x in layers]
    return ActivationTrace(tuple(layers), tuple(ranges))


class TestJointHistogram:
    def test_endpoints_to_corner_bins(self):
        h = joint_histogram([0.0, 1.0], [0.0, 1.0], HistogramConfig(2))
        np.testing.assert_array_equal(h.counts, [[1, 0], [0, 1]])
        assert h.total == 2

    def test_straddle_midpoint(self):
        h = joint_histogram([0.49, 0.51], [0.51, 0.49], HistogramConfig(2))
        np.testing.assert_array_equal(h.counts, [[0, 1], [1, 0]])

    def test_matches_scalar_binning(self):
        rng = np.random.default_rng(100)
        x, y = rng.random(100), rng.random(100)
        h = joint_histogram(x, y, HistogramConfig(4))
        np.testing.assert_array_equal(h.counts, histogram_scalar(x, y, 4))
        assert h.counts.sum() == 100

    def test_out_of_range(self):
        with pytest.raises(RangeError):
            joint_histogram([0.0, 1.1], [0.0, 0.5])
        with pytest.raises(RangeError):
            joint_histogram([-1e-6, 0.5], [0.0, 0.5])

    def test_tolerance_near_edges(self):
        h = joint_histogram([-1e-12, 1.0 + 1e-12], [0.5, 0.5], HistogramConfig(2))
        np.testing.assert_array_equal(h.counts, [[0, 1], [0, 1]])

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            joint_histogram([0.1, 0.2], [0.3])

    def test_bins_validation(self):
        with pytest.raises(InvalidInputError):
            HistogramConfig(1)
        assert HistogramConfig().bins == 32


class TestMutualInformation:
    def test_perfect_diagonal_is_ln2(self):
        h = JointHistogram.from_counts([[1, 0], [0, 1]])
        expected = 2 * 0.5 * math.log(0.5 / (0.5 * 0.5))
        assert mutual_information(h) == pytest.approx(expected, abs=1e-15)
        assert mutual_information(h) == pytest.approx(math.log(2), abs=1e-15)

    def test_product_distribution_is_zero(self):
        assert mutual_information(JointHistogram.from_counts([[1, 1], [1, 1]])) == 0.0

    def test_constant_x_is_zero(self):
        assert mutual_information(JointHistogram.from_counts([[0, 0, 0], [3, 1, 4], [0, 0, 0]])) == 0.0

    def test_random_against_double_loop(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            counts = rng.integers(0, 6, size=(4, 4))
            counts[0, 0] += 1
            h = JointHistogram.from_counts(counts)
            assert abs(mutual_information(h) - mi_double_loop(counts.tolist())) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.int64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=st.integers(0, 20)))
    def test_nonnegative_and_symmetric(self, counts):
        if counts.sum() == 0:
            counts[0, 0] = 1
        h = JointHistogram.from_counts(counts)
        mi = mutual_information(h)
        assert mi >= 0.0
        assert abs(mi - mutual_information(h.transpose())) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.integers(2, 64), st.integers(2, 8))
    def test_self_mi_equals_binned_entropy(self, seed, samples, bins):
        x = np.random.default_rng(seed).random(samples)
        mi = mutual_information(joint_histogram(x, x, HistogramConfig(bins)))
        assert abs(mi - entropy_scalar(x, bins)) <= 1e-12

    def test_independent_uniform_bias_bound(self):
        rng = np.random.default_rng(2024)
        x, y = rng.random(5000), rng.random(5000)
        mi = mutual_information(joint_histogram(x, y, HistogramConfig(32)))
        assert 0.0 < mi <= 0.2

    def test_entropy_helper(self):
        assert entropy([1, 1]) == pytest.approx(math.log(2), abs=1e-15)
        assert entropy([5, 0]) == 0.0


class TestLayerMI:
    def test_identity_self_pairs_dominate(self, backend):
        trace = record_trace(identity_net(2), ProbeConfig(num_samples=2000, seed=0))
        v = layer_mi(trace, 1, backend=backend).values
        assert min(v[0, 0], v[1, 1]) > max(v[0, 1], v[1, 0])

    def test_identity_matched_pairs_equal_self_mi(self, backend):
        cfg = HistogramConfig(16)
        trace = record_trace(identity_net(3), ProbeConfig(num_samples=1500, seed=3))
        v = layer_mi(trace, 1, cfg, backend=backend).values
        for n in range(3):
            x = trace.layers[0][:, n]
            assert abs(v[n, n] - mutual_information(joint_histogram(x, x, cfg))) <= 1e-9

    def test_dead_output_column_is_zero(self, backend):
        w = np.array([[1.0, 1.0], [0.0, 0.0], [1.0, -1.0]])
        net = Network((LinearLayer(w, np.zeros(3), Activation.RELU),), 2)
        trace = record_trace(net, ProbeConfig(num_samples=500, seed=0))
        v = layer_mi(trace, 1, backend=backend).values
        np.testing.assert_array_equal(v[:, 1], 0.0)
        assert (v[:, [0, 2]] > 0).all()

    def test_hand_data_against_brute_force(self, backend):
        rng = np.random.default_rng(10)
        x0 = np.round(rng.random((10, 3)), 2)
        x1 = np.round(rng.random((10, 2)), 2)
        x0[0], x0[1] = 0.0, 1.0
        x1[0], x1[1] = 0.0, 1.0
        trace = trace_from(x0, x1)
        cfg = HistogramConfig(3)
        v = layer_mi(trace, 1, cfg, backend=backend).values
        assert v.shape == (3, 2)
        for n in range(3):
            for m in range(2):
                a = trace.layers[0][:, n].astype(np.float64)
                b = trace.layers[1][:, m].astype(np.float64)
                assert abs(v[n, m] - mi_double_loop(histogram_scalar(a, b, 3))) <= 1e-12

    def test_index_out_of_range(self):
        trace = record_trace(identity_net(2), ProbeConfig(num_samples=10))
        with pytest.raises(InvalidInputError):
            layer_mi(trace, 0)
        with pytest.raises(InvalidInputError):
            layer_mi(trace, 2)

    def test_nonnegative_finite(self, rng, backend):
        trace = record_trace(random_net(rng, [5, 6, 3]), ProbeConfig(num_samples=300, seed=1))
        for m in all_layer_mi(trace, HistogramConfig(8), backend=backend):
            assert np.all(np.isfinite(m.values)) and m.values.min() >= -1e-12


class TestAllLayerMI:
    def test_shapes(self, rng):
        net = random_net(rng, [4, 6, 5, 3])
        mats = all_layer_mi(record_trace(net, ProbeConfig(num_samples=200, seed=0)), HistogramConfig(8))
        assert [m.shape for m in mats] == [(4, 6), (6, 5), (5, 3)]
        assert [m.layer_index for m in mats] == [1, 2, 3]

    def test_recomputation_bitwise(self, rng):
        trace = record_trace(random_net(rng, [4, 6, 3]), ProbeConfig(num_samples=200, seed=0))
        assert all_layer_mi(trace) == all_layer_mi(trace)

    def test_concatenated_oracles(self, rng):
        trace = record_trace(random_net(rng, [3, 4, 2]), ProbeConfig(num_samples=40, seed=6))
        mats = all_layer_mi(trace, HistogramConfig(4))
        for i, mat in enumerate(mats, start=1):
            for n in range(mat.shape[0]):
                for m in range(mat.shape[1]):
                    a = trace.layers[i - 1][:, n].astype(np.float64)
                    b = trace.layers[i][:, m].astype(np.float64)
                    ref = 0.0 if trace.constant(i)[m] or trace.constant(i - 1)[n] else mi_double_loop(histogram_scalar(a, b, 4))
                    assert abs(mat.values[n, m] - ref) <= 1e-12

    @pytest.mark.parametrize("workers,block", [(1, 1), (1, 3), (2, 2), (4, 1), (3, None)])
    def test_partitioning_is_bitwise_invariant(self, workers, block, backend):
        rng = np.random.default_rng(8)
        trace = record_trace(random_net(rng, [7, 9, 4]), ProbeConfig(num_samples=400, seed=2))
        ref = all_layer_mi(trace, backend=backend)
        got = all_layer_mi(trace, workers=workers, block=block, backend=backend)
        assert got == ref


@pytest.mark.skipif(len(_kernels.available_backends()) < 2, reason="compiled kernel not built")
def test_backends_agree():
    rng = np.random.default_rng(21)
    for _ in range(5):
        trace = record_trace(random_net(rng, [6, 8, 5]), ProbeConfig(num_samples=700, seed=int(rng.integers(1000))))
        for i in (1, 2):
            a = layer_mi(trace, i, backend="cython").values
            b = layer_mi(trace, i, backend="python").values
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_backend_selection_env(monkeypatch):
    monkeypatch.setenv("MIPR_BACKEND", "python")
    assert _kernels._select() == "python"
    with pytest.raises(ValueError):
        _kernels.pairwise_mi(np.zeros((1, 2), np.int32), np.zeros((1, 2), np.int32), 2, np.zeros(1, np.uint8), np.zeros(1, np.uint8), 0, 1, backend="fortran")

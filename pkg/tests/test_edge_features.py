"""Tests for the four edge strategies, with hand-computed oracles."""

from __future__ import annotations

import numpy as np
import pytest

from _gradcheck import check_gradients
from mtsgraph import edge_features as ef
from mtsgraph.autodiff import Tensor
from mtsgraph.errors import DimensionMismatch
from mtsgraph.ts_io import MultivariateSeries


def pcc_brute(a, b):
    da, db = a - a.mean(), b - b.mean()
    return float(np.sum(da * db) / (np.sqrt(np.sum(da * da))
                                    * np.sqrt(np.sum(db * db))))


def sample_from(channels):
    return MultivariateSeries(channels=np.asarray(channels, dtype=float),
                              label="a")


class TestCompleteGraph:
    def test_all_ones(self):
        adj = ef.complete_graph(4)
        assert adj.kind == "cg"
        np.testing.assert_array_equal(adj.values, np.ones((4, 4)))


class TestPcc:
    def test_hand_value(self):
        adj = ef.pcc(np.array([[1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0]]))
        assert abs(adj.values[0, 1] - 0.8) < 1e-12

    def test_absolute_value_of_anticorrelation(self):
        x = np.array([[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]])
        adj = ef.pcc(x)
        assert abs(adj.values[0, 1] - 1.0) < 1e-12

    def test_matches_population_formula(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(5, 30))
        adj = ef.pcc(x)
        for i in range(5):
            for j in range(5):
                expect = abs(pcc_brute(x[i], x[j]))
                assert abs(adj.values[i, j] - expect) < 1e-10

    def test_constant_channel_zeroed_with_unit_diagonal(self):
        x = np.array([[2.0, 2.0, 2.0], [1.0, 2.0, 3.0]])
        adj = ef.pcc(x)
        assert adj.values[0, 0] == 1.0
        assert adj.values[0, 1] == 0.0 and adj.values[1, 0] == 0.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(1)
        adj = ef.pcc(rng.normal(size=(6, 40)))
        np.testing.assert_array_equal(adj.values, adj.values.T)
        assert np.all(adj.values >= 0.0) and np.all(adj.values <= 1.0)


class TestMutualInformation:
    def test_identical_uniform_channels_give_log2_bins(self):
        # 16 evenly spread values over 4 bins: 4 per bin, H = 2 bits
        row = np.arange(16.0)
        adj = ef.mutual_information(np.stack([row, row]), bins=4)
        assert abs(adj.values[0, 1] - 2.0) < 1e-12
        assert abs(adj.values[0, 0] - 2.0) < 1e-12

    def test_independent_channels_give_zero(self):
        x = np.array([[0.0, 0.0, 1.0, 1.0] * 4, [0.0, 1.0, 0.0, 1.0] * 4])
        adj = ef.mutual_information(x, bins=2)
        assert abs(adj.values[0, 1]) < 1e-12

    def test_dependent_binary_channels_give_one_bit(self):
        x = np.array([[0.0] * 8 + [1.0] * 8, [0.0] * 8 + [1.0] * 8])
        adj = ef.mutual_information(x, bins=2)
        assert abs(adj.values[0, 1] - 1.0) < 1e-12

    def test_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(1, 50))
        both = np.concatenate([x, 2.0 * x])
        adj = ef.mutual_information(both, bins=5)
        assert abs(adj.values[0, 1] - adj.values[0, 0]) < 1e-12

    def test_symmetric_nonnegative_and_bounded_by_entropy(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(5, 64))
        adj = ef.mutual_information(x)
        np.testing.assert_allclose(adj.values, adj.values.T, atol=1e-12)
        assert np.all(adj.values >= 0.0)
        h = np.diag(adj.values)
        for i in range(5):
            for j in range(5):
                assert adj.values[i, j] <= min(h[i], h[j]) + 1e-9

    def test_default_bin_rule(self):
        assert ef.default_mi_bins(100) == 10
        assert ef.default_mi_bins(3) == 2
        assert ef.default_mi_bins(400) == 16
        assert ef.default_mi_bins(206) == 14

    def test_default_bins_used_on_sample(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(3, 100))
        auto = ef.mutual_information(x)
        explicit = ef.mutual_information(x, bins=10)
        np.testing.assert_array_equal(auto.values, explicit.values)


class TestAel:
    def test_placeholder_is_identity(self):
        adj = ef.ael_placeholder(3)
        assert adj.kind == "ael"
        np.testing.assert_array_equal(adj.values, np.eye(3))

    def test_two_node_hand_value(self):
        # scores row 0 are [0, ln 3], so softmax is [1/4, 3/4]
        feats = Tensor(np.array([[0.0], [1.0]]))
        params = ef.AelParams(weight=Tensor(np.array([np.log(3.0)])))
        adj = ef.ael_forward(feats, params)
        np.testing.assert_allclose(adj.data, [[0.25, 0.75], [0.75, 0.25]],
                                   atol=1e-12)

    def test_rows_sum_to_one_and_strictly_positive(self):
        rng = np.random.default_rng(5)
        feats = Tensor(rng.normal(size=(6, 4)))
        params = ef.AelParams(weight=Tensor(rng.normal(size=(4,))))
        adj = ef.ael_forward(feats, params)
        np.testing.assert_allclose(adj.data.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(adj.data > 0.0)

    def test_nonpositive_scores_collapse_to_uniform(self):
        rng = np.random.default_rng(6)
        feats = Tensor(rng.normal(size=(4, 3)))
        params = ef.AelParams(weight=Tensor(-np.ones(3)))
        adj = ef.ael_forward(feats, params)
        np.testing.assert_allclose(adj.data, 0.25, atol=1e-12)

    def test_gradients(self):
        rng = np.random.default_rng(8)
        # distinct positive features keep |f_i - f_j| and the ReLU away
        # from their kinks for off-diagonal pairs
        feats = np.cumsum(rng.uniform(0.5, 1.5, size=(4, 3)), axis=0)
        weight = rng.uniform(0.5, 1.0, size=(3,))
        target = rng.normal(size=(4, 4))

        def build(ts):
            adj = ef.ael_forward(ts[0], ef.AelParams(weight=ts[1]))
            return (adj * Tensor(target)).sum()

        check_gradients(build, [feats, weight])

    def test_weight_width_checked(self):
        with pytest.raises(DimensionMismatch):
            ef.ael_forward(Tensor(np.ones((3, 4))),
                           ef.AelParams(weight=Tensor(np.ones(3))))


class TestComputeAdjacency:
    def test_dispatch(self):
        rng = np.random.default_rng(2)
        sample = sample_from(rng.normal(size=(3, 25)))
        for kind in ef.EDGE_KINDS:
            adj = ef.compute_adjacency(sample, kind)
            assert adj.kind == kind
            assert adj.values.shape == (3, 3)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            ef.compute_adjacency(sample_from(np.ones((2, 5))), "knn")

    def test_static_kinds_use_raw_channels(self):
        # adjacency must come from the series, not from any feature matrix
        x = np.array([[1.0, 2.0, 3.0, 4.0], [1.0, 3.0, 2.0, 4.0]])
        adj = ef.compute_adjacency(sample_from(x), "pcc")
        assert abs(adj.values[0, 1] - 0.8) < 1e-12

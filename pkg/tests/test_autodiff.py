"""Gradient and engine checks for the autodiff substrate.

Every differentiable primitive is checked against central finite
differences on inputs sampled away from kinks.  Engine semantics
(accumulation, zeroing, no_grad, scalar-only backward, finite checks)
get direct tests.
"""

from __future__ import annotations

import numpy as np
import pytest

from _gradcheck import check_gradients, sample_away_from_kinks
from mtsgraph import autodiff as ad
from mtsgraph.autodiff import Tensor
from mtsgraph.errors import NonFiniteDetected, NotScalar, ShapeMismatch

N_TRIALS = 5


def _rngs():
    return [np.random.default_rng(1000 + t) for t in range(N_TRIALS)]


class TestPrimitiveGradients:
    def test_add_broadcast(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (3, 1))
            b = sample_away_from_kinks(rng, (1, 4))
            check_gradients(lambda ts: (ts[0] + ts[1]).sum(), [a, b])

    def test_sub(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (2, 3))
            b = sample_away_from_kinks(rng, (3,))
            check_gradients(lambda ts: (ts[0] - ts[1]).sum(), [a, b])

    def test_mul_broadcast(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (2, 3))
            b = sample_away_from_kinks(rng, (2, 1))
            check_gradients(lambda ts: (ts[0] * ts[1]).sum(), [a, b])

    def test_div(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (3, 3))
            b = sample_away_from_kinks(rng, (3, 3), low=0.5)
            check_gradients(lambda ts: (ts[0] / ts[1]).sum(), [a, b])

    def test_neg(self):
        rng = np.random.default_rng(0)
        a = sample_away_from_kinks(rng, (4,))
        check_gradients(lambda ts: (-ts[0]).sum(), [a])

    def test_matmul(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (3, 4))
            b = sample_away_from_kinks(rng, (4, 2))
            check_gradients(lambda ts: (ts[0] @ ts[1]).sum(), [a, b])

    def test_matmul_batched(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (2, 3, 4))
            b = sample_away_from_kinks(rng, (4, 2))
            check_gradients(lambda ts: (ts[0] @ ts[1]).sum(), [a, b])

    def test_transpose(self):
        rng = np.random.default_rng(0)
        a = sample_away_from_kinks(rng, (2, 3, 4))
        check_gradients(
            lambda ts: (ts[0].transpose((1, 2, 0)) * 1.5).sum(), [a])

    def test_reshape(self):
        rng = np.random.default_rng(0)
        a = sample_away_from_kinks(rng, (2, 6))
        check_gradients(
            lambda ts: (ts[0].reshape(3, 4) * ts[0].reshape(3, 4)).sum(), [a])

    def test_getitem(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (4, 5))
            check_gradients(lambda ts: (ts[0][1:3, ::2] * 2.0).sum(), [a])
            check_gradients(lambda ts: ts[0][2, 3], [a])

    def test_concat(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (2, 3))
            b = sample_away_from_kinks(rng, (2, 2))
            check_gradients(
                lambda ts: (ad.concat([ts[0], ts[1]], axis=1)
                            * ad.concat([ts[0], ts[1]], axis=1)).sum(),
                [a, b])

    def test_sum_axes(self):
        rng = np.random.default_rng(3)
        a = sample_away_from_kinks(rng, (2, 3, 4))
        check_gradients(lambda ts: ts[0].sum(), [a])
        check_gradients(lambda ts: (ts[0].sum(axis=1) * 2.0).sum(), [a])
        check_gradients(
            lambda ts: (ts[0].sum(axis=(0, 2), keepdims=True) * 3.0).sum(), [a])

    def test_mean(self):
        rng = np.random.default_rng(4)
        a = sample_away_from_kinks(rng, (3, 4))
        check_gradients(lambda ts: ts[0].mean(), [a])
        check_gradients(lambda ts: (ts[0].mean(axis=0) * ts[0].mean(axis=0)).sum(),
                        [a])

    @pytest.mark.parametrize("name", ["relu", "leaky_relu", "sigmoid", "tanh",
                                      "exp", "abs"])
    def test_pointwise(self, name):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (3, 4))
            check_gradients(lambda ts: getattr(ts[0], name)().sum(), [a])

    def test_log(self):
        for rng in _rngs():
            a = np.abs(sample_away_from_kinks(rng, (3, 4), low=0.1))
            check_gradients(lambda ts: ts[0].log().sum(), [a])

    def test_softmax(self):
        for rng in _rngs():
            a = sample_away_from_kinks(rng, (3, 5))
            w = sample_away_from_kinks(rng, (3, 5))
            check_gradients(
                lambda ts: (ts[0].softmax(axis=-1) * Tensor(w)).sum(), [a])

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(9)
        x = Tensor(rng.normal(size=(6, 7)) * 50.0)
        rows = x.softmax(axis=-1).data.sum(axis=-1)
        assert np.allclose(rows, 1.0, atol=1e-12)

    def test_causal_conv1d(self):
        for rng in _rngs():
            x = sample_away_from_kinks(rng, (2, 6, 3))
            w = sample_away_from_kinks(rng, (3, 3, 4))
            b = sample_away_from_kinks(rng, (4,))
            check_gradients(
                lambda ts: ad.causal_conv1d(ts[0], ts[1], ts[2]).sum(),
                [x, w, b])
            check_gradients(
                lambda ts: ad.causal_conv1d(ts[0], ts[1]).sum(), [x, w])

    def test_causal_conv1d_output_length(self):
        x = Tensor(np.zeros((1, 10, 2)))
        w = Tensor(np.zeros((3, 2, 5)))
        assert ad.causal_conv1d(x, w).shape == (1, 8, 5)

    def test_glu(self):
        for rng in _rngs():
            x = sample_away_from_kinks(rng, (2, 3, 4))
            check_gradients(lambda ts: ad.glu(ts[0], axis=-1).sum(), [x])

    def test_glu_matches_definition(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(3, 6))
        got = ad.glu(Tensor(x), axis=-1).data
        expect = x[:, :3] * (1.0 / (1.0 + np.exp(-x[:, 3:])))
        assert np.allclose(got, expect, atol=1e-12)

    def test_dropout(self):
        a = sample_away_from_kinks(np.random.default_rng(11), (4, 4))
        check_gradients(
            lambda ts: ad.dropout(ts[0], 0.5, np.random.default_rng(7)).sum(),
            [a])

    def test_dropout_zero_rate_is_identity(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        assert ad.dropout(x, 0.0, np.random.default_rng(0)) is x

    def test_cross_entropy_gradient(self):
        for rng in _rngs():
            z = sample_away_from_kinks(rng, (5,))
            check_gradients(
                lambda ts: ad.cross_entropy_with_logits(ts[0], 2), [z])

    def test_cross_entropy_gradient_is_softmax_minus_onehot(self):
        rng = np.random.default_rng(21)
        z = Tensor(rng.normal(size=(4,)), requires_grad=True)
        ad.cross_entropy_with_logits(z, 1).backward()
        e = np.exp(z.data - z.data.max())
        expect = e / e.sum()
        expect[1] -= 1.0
        assert np.allclose(z.grad, expect, atol=1e-12)


class TestCrossEntropyValues:
    def test_uniform_logits_give_log_c(self):
        for c in (2, 4, 10):
            z = Tensor(np.zeros(c))
            loss = ad.cross_entropy_with_logits(z, 0).item()
            assert abs(loss - np.log(c)) < 1e-12

    def test_extreme_logits_stay_finite(self):
        z = Tensor(np.array([1e3, -1e3, 0.0]))
        loss = ad.cross_entropy_with_logits(z, 0)
        assert np.isfinite(loss.item())
        assert loss.item() < 1e-10  # overwhelming correct logit
        loss_bad = ad.cross_entropy_with_logits(z, 1)
        assert np.isfinite(loss_bad.item())
        assert abs(loss_bad.item() - 2e3) < 1.0


class TestEngine:
    def test_gradients_accumulate_until_zeroed(self):
        x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        (x * x).sum().backward()
        first = x.grad.copy()
        (x * x).sum().backward()
        assert np.allclose(x.grad, 2.0 * first)
        ad.zero_grad([x])
        assert x.grad is None

    def test_diamond_graph(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        y = x * x + x  # dy/dx = 2x + 1
        y.backward()
        assert np.allclose(x.grad, 7.0)

    def test_reused_subexpression(self):
        x = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
        h = x.tanh()
        out = (h * h).sum()
        out.backward()
        expect = 2.0 * np.tanh(x.data) * (1.0 - np.tanh(x.data) ** 2)
        assert np.allclose(x.grad, expect, atol=1e-12)

    def test_backward_rejects_non_scalar(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(NotScalar):
            (x * 2.0).backward()

    def test_no_grad_builds_no_graph(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with ad.no_grad():
            y = (x * 2.0).sum()
        assert not y.requires_grad

    def test_unused_leaf_gets_no_grad(self):
        x = Tensor(np.ones(2), requires_grad=True)
        y = Tensor(np.ones(2), requires_grad=True)
        (x.sum()).backward()
        assert y.grad is None

    def test_finite_check_raises(self):
        x = Tensor(np.array([-1.0]))
        with np.errstate(invalid="ignore"):
            with pytest.raises(NonFiniteDetected):
                x.log()

    def test_finite_check_can_be_disabled(self):
        x = Tensor(np.array([-1.0]))
        ad.set_finite_checks(False)
        try:
            with np.errstate(invalid="ignore"):
                out = x.log()
            assert np.isnan(out.data).all()
        finally:
            ad.set_finite_checks(True)

    def test_matmul_shape_errors(self):
        with pytest.raises(ShapeMismatch):
            Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))
        with pytest.raises(ShapeMismatch):
            Tensor(np.ones(3)) @ Tensor(np.ones((3, 2)))

    def test_conv_kernel_longer_than_input(self):
        with pytest.raises(ShapeMismatch):
            ad.causal_conv1d(Tensor(np.ones((1, 2, 1))),
                             Tensor(np.ones((3, 1, 1))))

    def test_glu_odd_axis(self):
        with pytest.raises(ShapeMismatch):
            ad.glu(Tensor(np.ones((2, 5))))


class TestInitialisers:
    def test_kaiming_bound_and_determinism(self):
        fan_in = 128
        bound = np.sqrt(6.0 / fan_in)
        w1 = ad.kaiming_uniform(np.random.default_rng(42), (fan_in, 64), fan_in)
        w2 = ad.kaiming_uniform(np.random.default_rng(42), (fan_in, 64), fan_in)
        assert np.array_equal(w1.data, w2.data)
        assert np.abs(w1.data).max() <= bound
        assert np.abs(w1.data).max() > 0.9 * bound  # spread fills the range
        assert w1.requires_grad

    def test_glorot_bound(self):
        w = ad.glorot_uniform(np.random.default_rng(1), (64, 32), 64, 32)
        bound = np.sqrt(6.0 / 96)
        assert np.abs(w.data).max() <= bound
        assert np.abs(w.data).max() > 0.9 * bound

    def test_zeros(self):
        b = ad.zeros((4,), requires_grad=True)
        assert b.requires_grad and not b.data.any()

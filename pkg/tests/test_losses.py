"""Tests for the four training losses and their gated combination."""

import numpy as np
import pytest

from conftest import assert_grads_close, finite_difference
from vipnerf import autodiff as ad
from vipnerf.autodiff import ShapeError, Tape, Tensor
from vipnerf.losses import (
    LossWeights,
    loss_mse,
    loss_sparse_depth,
    loss_vip,
    loss_vis_consistency,
    total_loss,
)


class TestLossWeights:
    def test_defaults_match_recipe(self):
        w = LossWeights()
        assert (w.mse, w.sparse_depth, w.vip, w.vis_consistency) == (1.0, 0.1, 0.001, 0.1)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(vip=-0.1)
        with pytest.raises(ValueError):
            LossWeights(vip_start_iteration=-1)


class TestMse:
    def test_zero_at_fixed_point(self):
        c = np.array([[0.2, 0.4, 0.6]])
        with Tape():
            assert loss_mse(Tensor(c), c).data == 0.0

    def test_unit_error(self):
        with Tape():
            val = loss_mse(Tensor(np.array([[0.0, 0.0, 0.0]])),
                           np.array([[1.0, 0.0, 0.0]]))
        assert val.data == pytest.approx(1.0)

    def test_arithmetic_example(self):
        with Tape():
            val = loss_mse(Tensor(np.array([[0.4, 0.6, 0.5]])),
                           np.array([[0.5, 0.5, 0.5]]))
        assert val.data == pytest.approx(0.02)

    def test_batch_mean(self):
        pred = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        target = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        with Tape():
            val = loss_mse(Tensor(pred), target)
        assert val.data == pytest.approx(0.5)


class TestVip:
    def test_zero_prior_no_loss(self):
        with Tape():
            val = loss_vip(Tensor(np.array([0.1, 0.9])), np.array([0.0, 0.0]))
        assert val.data == 0.0

    def test_hinge_values(self):
        with Tape():
            val = loss_vip(Tensor(np.array([0.3])), np.array([1.0]))
        assert val.data == pytest.approx(0.7)
        with Tape():
            val = loss_vip(Tensor(np.array([1.0])), np.array([1.0]))
        assert val.data == 0.0

    def test_no_gradient_where_prior_zero(self):
        t = Tensor(np.array([0.2, 0.8]), requires_grad=True)
        with Tape() as tape:
            val = loss_vip(t, np.array([0.0, 1.0]))
            ad.backward(tape, val)
        assert t.grad[0] == 0.0
        assert t.grad[1] == pytest.approx(-0.5)


class TestVisConsistency:
    def test_zero_at_agreement(self):
        T = Tensor(np.array([[1.0, 0.5, 0.2]]), requires_grad=True)
        with Tape() as tape:
            val = loss_vis_consistency(T, T)
            ad.backward(tape, val)
        assert val.data == 0.0
        np.testing.assert_array_equal(T.grad, 0.0)

    def test_one_sample_example(self):
        # T=1, vis_head=0: (1-0)^2 + (1-0)^2 = 2
        with Tape():
            val = loss_vis_consistency(Tensor(np.array([[1.0]])),
                                       Tensor(np.array([[0.0]])))
        assert val.data == pytest.approx(2.0)

    def test_shape_mismatch_rejected(self):
        with Tape():
            with pytest.raises(ShapeError):
                loss_vis_consistency(Tensor(np.zeros((1, 3))), Tensor(np.zeros((1, 4))))

    def test_gradient_split(self):
        # each branch's gradient is 2*(own - other) with no cross terms
        T0 = np.array([[0.9, 0.4]])
        V0 = np.array([[0.6, 0.7]])
        T = Tensor(T0.copy(), requires_grad=True)
        V = Tensor(V0.copy(), requires_grad=True)
        with Tape() as tape:
            val = loss_vis_consistency(T, V)
            ad.backward(tape, val)
        np.testing.assert_allclose(T.grad, 2 * (T0 - V0))
        np.testing.assert_allclose(V.grad, 2 * (V0 - T0))

    def test_gradient_split_matches_finite_differences(self):
        # freeze one branch at a time and compare the other to central
        # differences on a loss where stop-gradient matters
        rng = np.random.default_rng(0)
        T = Tensor(rng.random((2, 3)), requires_grad=True)
        V = Tensor(rng.random((2, 3)), requires_grad=True)

        def run():
            with Tape() as tape:
                val = loss_vis_consistency(T, V)
            return tape, val

        tape, val = run()
        ad.backward(tape, val)
        # full-loss finite differences see both branches; with the split
        # semantics each analytic gradient equals half the symmetric total
        numeric = finite_difference(lambda: run()[1].data.item(), [T, V])
        assert_grads_close([2 * T.grad, 2 * V.grad], numeric)


class TestSparseDepth:
    def test_values(self):
        with Tape():
            assert loss_sparse_depth(Tensor(np.array([2.0])), np.array([2.0])).data == 0.0
        with Tape():
            val = loss_sparse_depth(Tensor(np.array([2.5])), np.array([2.0]))
        assert val.data == pytest.approx(0.25)
        with Tape():
            val = loss_sparse_depth(Tensor(np.array([2.5, 3.0])), np.array([2.0, 3.0]))
        assert val.data == pytest.approx(0.125)


class TestTotalLoss:
    def _ones(self):
        return {k: Tensor(np.array(1.0)) for k in ("mse", "sd", "vip", "v")}

    def test_paper_weights_after_gate(self):
        c = self._ones()
        w = LossWeights(vip_start_iteration=100)
        with Tape():
            val = total_loss(c["mse"], c["sd"], c["vip"], c["v"], w, iteration=100)
        assert val.data == pytest.approx(1.201)

    def test_gated_before_start(self):
        c = self._ones()
        w = LossWeights(vip_start_iteration=100)
        with Tape():
            val = total_loss(c["mse"], c["sd"], c["vip"], c["v"], w, iteration=99)
        assert val.data == pytest.approx(1.2)

    def test_ablation_weights(self):
        # zeroing the visibility terms leaves mse + sparse depth only
        c = self._ones()
        w = LossWeights(vip=0.0, vis_consistency=0.0)
        with Tape():
            val = total_loss(c["mse"], c["sd"], c["vip"], c["v"], w, iteration=0)
        assert val.data == pytest.approx(1.1)

    def test_linear_in_components(self):
        w = LossWeights(vip_start_iteration=0)
        with Tape():
            a = total_loss(Tensor(np.array(2.0)), Tensor(np.array(0.0)),
                           Tensor(np.array(0.0)), Tensor(np.array(0.0)), w, 0)
            b = total_loss(Tensor(np.array(1.0)), Tensor(np.array(0.0)),
                           Tensor(np.array(0.0)), Tensor(np.array(0.0)), w, 0)
        assert a.data == pytest.approx(2 * b.data)

    def test_negative_iteration_rejected(self):
        c = self._ones()
        with Tape():
            with pytest.raises(ValueError):
                total_loss(c["mse"], None, None, None, LossWeights(), iteration=-1)

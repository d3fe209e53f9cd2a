"""Finite-difference verification of every autograd op's backward pass."""

import numpy as np
import pytest

from conftest import numeric_gradient
from emg2text.errors import DegenerateMaskError, GraphStateError, ParameterError
from emg2text.nn import autograd as ag


def check_grad(build_loss, *arrays, eps=1e-4, rtol=1e-3, atol=1e-6):
    """Compare analytic gradients of a scalar loss against central
    finite differences for every input array."""
    params = [ag.parameter(a.copy()) for a in arrays]
    loss = build_loss(*params)
    ag.backward(loss)
    for i, (p, a) in enumerate(zip(params, arrays)):
        def f(x, i=i):
            fresh = [ag.parameter(arr.copy()) for arr in arrays]
            fresh[i].data = x
            return float(build_loss(*fresh).data)

        numeric = numeric_gradient(f, a.copy(), eps=eps)
        analytic = p.grad if p.grad is not None else np.zeros_like(a)
        np.testing.assert_allclose(analytic, numeric, rtol=rtol, atol=atol)


RNG = np.random.default_rng(1234)


class TestElementwiseOps:
    def test_add_broadcast(self):
        a, b = RNG.normal(size=(3, 4)), RNG.normal(size=4)
        check_grad(lambda x, y: ag.tsum(ag.mul(ag.add(x, y), ag.add(x, y))), a, b)

    def test_sub(self):
        a, b = RNG.normal(size=(2, 5)), RNG.normal(size=(2, 5))
        check_grad(lambda x, y: ag.tsum(ag.mul(ag.sub(x, y), ag.sub(x, y))), a, b)

    def test_mul_broadcast_row(self):
        a, b = RNG.normal(size=(3, 4)), RNG.normal(size=(1, 4))
        check_grad(lambda x, y: ag.tsum(ag.mul(x, y)), a, b)

    def test_scale(self):
        a = RNG.normal(size=(3, 3))
        check_grad(lambda x: ag.tsum(ag.mul(ag.scale(x, 2.5), x)), a)

    def test_relu(self):
        a = RNG.normal(size=(4, 4)) + 0.05  # keep clear of the kink
        check_grad(lambda x: ag.tsum(ag.mul(ag.relu(x), ag.relu(x))), a)

    def test_sqrt(self):
        a = np.abs(RNG.normal(size=(3, 4))) + 0.5
        check_grad(lambda x: ag.tsum(ag.sqrt(x)), a)

    def test_sum_axis_and_mean(self):
        a = RNG.normal(size=(3, 5))
        check_grad(lambda x: ag.tmean(ag.mul(ag.tsum(x, axis=1), ag.tsum(x, axis=1))), a)


class TestMatrixOps:
    def test_matmul(self):
        a, b = RNG.normal(size=(3, 4)), RNG.normal(size=(4, 2))
        check_grad(lambda x, y: ag.tsum(ag.mul(ag.matmul(x, y), ag.matmul(x, y))), a, b)

    def test_transpose(self):
        a = RNG.normal(size=(3, 4))
        check_grad(lambda x: ag.tsum(ag.mul(ag.transpose(x), ag.transpose(x))), a)

    def test_slice_and_concat_cols(self):
        a = RNG.normal(size=(3, 6))
        def loss(x):
            left = ag.slice_cols(x, 0, 3)
            right = ag.slice_cols(x, 3, 6)
            merged = ag.concat_cols([right, left])
            return ag.tsum(ag.mul(merged, merged))
        check_grad(loss, a)

    def test_gather_rows(self):
        table = RNG.normal(size=(5, 3))
        idx = np.array([0, 2, 2, 4])
        check_grad(lambda t: ag.tsum(ag.mul(ag.gather_rows(t, idx), ag.gather_rows(t, idx))), table)

    def test_gather_flat_with_repeats(self):
        table = RNG.normal(size=7)
        idx = np.array([[0, 1, 1], [6, 0, 3]])
        check_grad(lambda t: ag.tsum(ag.mul(ag.gather(t, idx), ag.gather(t, idx))), table)


class TestSoftmaxFamily:
    def test_masked_softmax_grad(self):
        logits = RNG.normal(size=(3, 5))
        check_grad(lambda x: ag.tsum(ag.mul(ag.masked_softmax(x), ag.masked_softmax(x))), logits)

    def test_masked_softmax_grad_with_mask(self):
        logits = RNG.normal(size=(3, 5))
        blocked = np.zeros((3, 5), dtype=bool)
        blocked[0, 2:] = True
        blocked[2, 0] = True
        def loss(x):
            w = ag.masked_softmax(x, blocked=blocked)
            return ag.tsum(ag.mul(w, w))
        check_grad(loss, logits)

    def test_masked_positions_weight_exactly_zero(self):
        logits = ag.Tensor(RNG.normal(size=(4, 4)))
        blocked = np.triu(np.ones((4, 4), dtype=bool), k=1)
        w = ag.masked_softmax(logits, blocked=blocked)
        assert np.all(w.data[blocked] == 0.0)
        np.testing.assert_allclose(w.data.sum(axis=1), 1.0, atol=1e-12)

    def test_fully_masked_row_rejected(self):
        logits = ag.Tensor(np.zeros((2, 3)))
        blocked = np.array([[True, True, True], [False, False, True]])
        with pytest.raises(DegenerateMaskError):
            ag.masked_softmax(logits, blocked=blocked)

    def test_log_softmax_grad(self):
        logits = RNG.normal(size=(4, 6))
        check_grad(lambda x: ag.tsum(ag.mul(ag.log_softmax(x), ag.log_softmax(x))), logits)

    def test_cross_entropy_grad(self):
        logits = RNG.normal(size=(5, 7))
        targets = np.array([0, 3, 6, 2, 2])
        check_grad(lambda x: ag.cross_entropy(x, targets), logits)

    def test_nll_of_targets_grad(self):
        logits = RNG.normal(size=(4, 5))
        targets = np.array([1, 0, 4, 3])
        check_grad(lambda x: ag.nll_of_targets(ag.log_softmax(x), targets), logits)


class TestLayerNorm:
    def test_grad_all_inputs(self):
        x = RNG.normal(size=(4, 6))
        gain = RNG.normal(size=6) + 1.5
        shift = RNG.normal(size=6)
        check_grad(lambda a, g, b: ag.tsum(ag.mul(ag.layer_norm(a, g, b), ag.layer_norm(a, g, b))), x, gain, shift)

    def test_normalizes_rows(self):
        x = ag.Tensor(RNG.normal(size=(3, 8)) * 5 + 2)
        out = ag.layer_norm(x, ag.Tensor(np.ones(8)), ag.Tensor(np.zeros(8)))
        np.testing.assert_allclose(out.data.mean(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(out.data.std(axis=1), 1.0, atol=1e-3)


class TestDropout:
    def test_eval_mode_is_identity(self):
        x = ag.Tensor(RNG.normal(size=(3, 3)))
        out = ag.dropout(x, 0.5, np.random.default_rng(0), training=False)
        assert out is x

    def test_training_mask_scales_survivors(self):
        x = ag.parameter(np.ones((200, 50)))
        out = ag.dropout(x, 0.25, np.random.default_rng(0), training=True)
        kept = out.data[out.data > 0]
        np.testing.assert_allclose(kept, 1.0 / 0.75)
        assert abs((out.data > 0).mean() - 0.75) < 0.02

    def test_grad_uses_same_mask(self):
        x = ag.parameter(RNG.normal(size=(4, 4)))
        out = ag.dropout(x, 0.5, np.random.default_rng(7), training=True)
        loss = ag.tsum(out)
        ag.backward(loss)
        mask = (out.data != 0).astype(float) / 0.5
        np.testing.assert_allclose(x.grad, mask)


class TestBackwardMachinery:
    def test_diamond_graph_accumulates(self):
        # z = x*x used twice must accumulate both contributions
        x = ag.parameter(np.array([3.0]))
        z = ag.mul(x, x)
        loss = ag.tsum(ag.add(z, z))
        ag.backward(loss)
        np.testing.assert_allclose(x.grad, [12.0])

    def test_backward_without_graph_is_state_error(self):
        with pytest.raises(GraphStateError):
            ag.backward(ag.Tensor(np.array(1.0)))

    def test_backward_needs_scalar(self):
        x = ag.parameter(np.ones((2, 2)))
        with pytest.raises(ParameterError):
            ag.backward(ag.mul(x, x))

    def test_zero_grads(self):
        x = ag.parameter(np.ones(3))
        loss = ag.tsum(ag.mul(x, x))
        ag.backward(loss)
        assert x.grad is not None
        ag.zero_grads({"x": x})
        assert x.grad is None

# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for dosediff.numerics
"""

import unittest

import numpy as np

from .gradcheck import check_gradients
from .init import truncated_normal
from .ops import (AttentionWeights, attention, conv2d, default_groups,
                  group_norm, linear, nearest_upsample2x, softmax, swish)
from .optim import AdamState, adam_step
from .tensor import (GradientTape, Tensor, backward, concat, matmul,
                     precision)
from ..internalutil import ContractError


def naive_conv2d(x, w, b, stride, padding):
    "six nested loops, the obvious way"
    n_batch, c_in, height, width = x.shape
    c_out, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = (height + 2 * padding - k) // stride + 1
    out_w = (width + 2 * padding - k) // stride + 1
    out = np.zeros((n_batch, c_out, out_h, out_w))
    for n in range(n_batch):
        for o in range(c_out):
            for i in range(out_h):
                for j in range(out_w):
                    acc = b[o]
                    for c in range(c_in):
                        for di in range(k):
                            for dj in range(k):
                                acc += w[o, c, di, dj] *\
                                    xp[n, c, i * stride + di, j * stride + dj]
                    out[n, o, i, j] = acc
    return out


def naive_attention(q_src, kv_src, weights):
    "attention written out with explicit small matrices"
    wq, bq, wk, bk, wv, bv, wo, bo = [np.asarray(w, dtype=np.float64)
                                      for w in weights]
    n_batch, channels = q_src.shape[:2]
    out = np.array(q_src, dtype=np.float64)
    for n in range(n_batch):
        qf = q_src[n].reshape(channels, -1)
        kf = kv_src[n].reshape(kv_src.shape[1], -1)
        q = wq[:, :, 0, 0].dot(qf) + bq[:, None]
        k = wk[:, :, 0, 0].dot(kf) + bk[:, None]
        v = wv[:, :, 0, 0].dot(kf) + bv[:, None]
        logits = q.T.dot(k) / np.sqrt(q.shape[0])
        attn = np.exp(logits - logits.max(axis=1, keepdims=True))
        attn /= attn.sum(axis=1, keepdims=True)
        attended = v.dot(attn.T)
        proj = wo[:, :, 0, 0].dot(attended) + bo[:, None]
        out[n] += proj.reshape(q_src.shape[1:])
    return out


def random_attention_weights(rng, channels, scale=0.5, zero_out=False):
    "attention weights as plain arrays"
    def conv1x1():
        return rng.normal(scale=scale, size=(channels, channels, 1, 1))
    wo = np.zeros((channels, channels, 1, 1)) if zero_out else conv1x1()
    bo = np.zeros(channels) if zero_out else rng.normal(size=channels)
    return AttentionWeights(conv1x1(), rng.normal(size=channels),
                            conv1x1(), rng.normal(size=channels),
                            conv1x1(), rng.normal(size=channels),
                            wo, bo)


# ---------------------------------------------------------------------
# tensors and tapes
# ---------------------------------------------------------------------

class TensorTest(unittest.TestCase):
    "basic tensor properties"

    def test_float32(self):
        "tensors default to float32"
        t = Tensor([[1, 2], [3, 4]])
        self.assertEqual(np.float32, t.data.dtype)
        self.assertEqual((2, 2), t.shape)
        self.assertEqual(4, t.size)

    def test_rank0(self):
        "scalars stay rank 0"
        self.assertEqual((), Tensor(np.float32(2.0)).shape)
        self.assertEqual((), Tensor(3.0).shape)
        self.assertEqual(2.0, Tensor(np.float32(2.0)).item())

    def test_precision(self):
        "precision context changes the default dtype, then restores it"
        with precision(np.float64):
            self.assertEqual(np.float64, Tensor([1.0]).data.dtype)
        self.assertEqual(np.float32, Tensor([1.0]).data.dtype)

    def test_no_tape_no_record(self):
        "outside a tape, results do not require gradients"
        w = Tensor([1.0, 2.0], requires_grad=True)
        out = w * w
        self.assertFalse(out.requires_grad)

    def test_deterministic(self):
        "identical inputs give bit-identical outputs"
        rng = np.random.default_rng(3)
        x = rng.normal(size=(2, 3, 8, 8))
        w = rng.normal(size=(4, 3, 3, 3))
        b = rng.normal(size=4)
        out1 = conv2d(Tensor(x), Tensor(w), Tensor(b), 2, 1).data
        out2 = conv2d(Tensor(x), Tensor(w), Tensor(b), 2, 1).data
        self.assertEqual(out1.tobytes(), out2.tobytes())


class BackwardTest(unittest.TestCase):
    "reverse mode differentiation"

    def test_quadratic(self):
        "d/dw sum(w * w) = 2w"
        w = Tensor([1.0, -2.0, 3.0], requires_grad=True)
        with GradientTape():
            loss = (w * w).sum()
        backward(loss)
        np.testing.assert_allclose(w.grad, [2.0, -4.0, 6.0])

    def test_scalar_loss(self):
        "full reductions are rank 0 and backpropagate"
        w = Tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
        with GradientTape():
            total = (w * w).sum()
            average = (w * w).mean()
        self.assertEqual((), total.shape)
        self.assertEqual((), average.shape)
        backward(total)
        np.testing.assert_allclose(w.grad, [[2.0, 4.0], [6.0, 8.0]])
        backward(average)
        np.testing.assert_allclose(w.grad, [[0.5, 1.0], [1.5, 2.0]])

    def test_unreachable(self):
        "a loss independent of w gives w a zero gradient"
        w = Tensor([1.0, 2.0], requires_grad=True)
        x = Tensor([3.0, 4.0], requires_grad=True)
        with GradientTape():
            _ = w * 2.0
            loss = (x * x).sum()
        backward(loss)
        np.testing.assert_array_equal(w.grad, [0.0, 0.0])
        np.testing.assert_allclose(x.grad, [6.0, 8.0])

    def test_unreachable_params(self):
        "parameters never used get zero gradients if listed"
        w = Tensor([1.0, 2.0], requires_grad=True)
        x = Tensor([3.0], requires_grad=True)
        with GradientTape():
            loss = (x * x).sum()
        backward(loss, params=[w, x])
        np.testing.assert_array_equal(w.grad, [0.0, 0.0])

    def test_fanout(self):
        "gradients of a tensor used twice add up"
        w = Tensor([2.0], requires_grad=True)
        with GradientTape():
            loss = (w * w * w).sum()
        backward(loss)
        np.testing.assert_allclose(w.grad, [12.0])

    def test_twice(self):
        "a second backward call assigns rather than accumulates"
        w = Tensor([1.0], requires_grad=True)
        for _ in range(2):
            with GradientTape():
                loss = (w * w).sum()
            backward(loss)
        np.testing.assert_allclose(w.grad, [2.0])

    def test_non_scalar(self):
        "non-scalar losses are refused"
        w = Tensor([1.0, 2.0], requires_grad=True)
        with GradientTape():
            loss = w * w
        self.assertRaises(ContractError, backward, loss)

    def test_algebra_gradients(self):
        "broadcasting algebra passes the finite difference check"
        rng = np.random.default_rng(0)

        def func(a, b, c):
            prod = matmul(a, b) / (c * c + 1.0)
            joined = concat([prod, a - 1.0], axis=2)
            return (joined * joined).mean() - (0.5 * prod).sum()
        mismatches = check_gradients(func, [rng.normal(size=(2, 3, 4)),
                                            rng.normal(size=(2, 4, 4)),
                                            rng.normal(size=(1, 1, 4))])
        self.assertEqual([], mismatches)

    def test_abs_gradients(self):
        "abs away from zero passes the check"
        rng = np.random.default_rng(19)
        x = rng.uniform(0.5, 2.0, size=(3, 3)) *\
            rng.choice([-1.0, 1.0], size=(3, 3))
        self.assertEqual([], check_gradients(
            lambda t: (t.abs() * t).sum(), [x]))

    def test_composite_gradients(self):
        "conv2d + group_norm + swish chain passes the check"
        rng = np.random.default_rng(1)
        proj = rng.normal(size=(2, 4, 6, 6))

        def func(x, w, b, gamma, beta):
            h = conv2d(x, w, b, 1, 1)
            h = swish(group_norm(h, 2, gamma, beta))
            return (h * proj).sum()
        mismatches = check_gradients(func, [rng.normal(size=(2, 3, 6, 6)),
                                            rng.normal(size=(4, 3, 3, 3)),
                                            rng.normal(size=4),
                                            rng.normal(size=4) + 1.0,
                                            rng.normal(size=4)])
        self.assertEqual([], mismatches)


# ---------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------

class Conv2dTest(unittest.TestCase):
    "conv2d against hand values and a loop oracle"

    def test_counting_ones(self):
        "ones on ones with padding: 9 in the centre, 4 in the corners"
        out = conv2d(Tensor(np.ones((1, 1, 3, 3))),
                     Tensor(np.ones((1, 1, 3, 3))),
                     Tensor([0.0]), 1, 1).data
        self.assertEqual(9.0, out[0, 0, 1, 1])
        self.assertEqual(4.0, out[0, 0, 0, 0])
        self.assertEqual(6.0, out[0, 0, 0, 1])

    def test_zero_kernel(self):
        "a zero kernel gives the bias everywhere"
        rng = np.random.default_rng(2)
        out = conv2d(Tensor(rng.normal(size=(2, 3, 5, 5))),
                     Tensor(np.zeros((2, 3, 3, 3))),
                     Tensor([1.5, -2.0]), 1, 1).data
        np.testing.assert_array_equal(out[:, 0], 1.5)
        np.testing.assert_array_equal(out[:, 1], -2.0)

    def test_oracle(self):
        "strided conv matches the nested loop oracle"
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 3, 8, 8)).astype(np.float32)
        w = rng.normal(size=(4, 3, 3, 3)).astype(np.float32)
        b = rng.normal(size=4).astype(np.float32)
        out = conv2d(Tensor(x), Tensor(w), Tensor(b), 2, 1).data
        self.assertEqual((2, 4, 4, 4), out.shape)
        np.testing.assert_allclose(out, naive_conv2d(x, w, b, 2, 1),
                                   atol=1e-5)

    def test_oracle_sweep(self):
        "all kernel/stride/padding combinations match the oracle"
        rng = np.random.default_rng(5)
        x = rng.normal(size=(2, 4, 8, 8)).astype(np.float32)
        for k in (1, 3):
            for stride in (1, 2):
                for padding in (0, 1):
                    w = rng.normal(size=(3, 4, k, k)).astype(np.float32)
                    b = rng.normal(size=3).astype(np.float32)
                    out = conv2d(Tensor(x), Tensor(w), Tensor(b),
                                 stride, padding).data
                    np.testing.assert_allclose(
                        out, naive_conv2d(x, w, b, stride, padding),
                        atol=1e-5)

    def test_channel_mismatch(self):
        "mismatched input channels are a contract violation"
        self.assertRaises(ContractError, conv2d,
                          Tensor(np.ones((1, 2, 4, 4))),
                          Tensor(np.ones((1, 3, 3, 3))),
                          Tensor([0.0]), 1, 1)

    def test_bad_kernel(self):
        "only 1x1 and 3x3 kernels"
        self.assertRaises(ContractError, conv2d,
                          Tensor(np.ones((1, 1, 6, 6))),
                          Tensor(np.ones((1, 1, 5, 5))),
                          Tensor([0.0]), 1, 2)

    def test_gradients(self):
        "conv2d passes the finite difference check"
        rng = np.random.default_rng(6)
        proj = rng.normal(size=(2, 3, 3, 3))

        def func(x, w, b):
            return (conv2d(x, w, b, 2, 1) * proj).sum()
        self.assertEqual([], check_gradients(
            func, [rng.normal(size=(2, 4, 6, 6)),
                   rng.normal(size=(3, 4, 3, 3)),
                   rng.normal(size=3)]))


class GroupNormTest(unittest.TestCase):
    "group normalisation"

    def test_constant(self):
        "constant input normalises to zero"
        out = group_norm(Tensor(np.full((1, 4, 3, 3), 7.0)), 2,
                         Tensor(np.ones(4)), Tensor(np.zeros(4))).data
        np.testing.assert_allclose(out, 0.0, atol=1e-6)

    def test_zero_gamma(self):
        "gamma = 0 leaves beta"
        rng = np.random.default_rng(7)
        out = group_norm(Tensor(rng.normal(size=(2, 4, 3, 3))), 2,
                         Tensor(np.zeros(4)), Tensor(np.full(4, 0.25))).data
        np.testing.assert_allclose(out, 0.25)

    def test_statistics(self):
        "per group mean 0 and variance 1 before the affine part"
        rng = np.random.default_rng(8)
        out = group_norm(Tensor(rng.normal(size=(2, 4, 4, 4))), 2,
                         Tensor(np.ones(4)), Tensor(np.zeros(4))).data
        grouped = out.astype(np.float64).reshape(2, 2, -1)
        self.assertTrue(np.all(np.abs(grouped.mean(axis=2)) < 1e-5))
        self.assertTrue(np.all(np.abs(grouped.var(axis=2) - 1.0) < 1e-4))

    def test_indivisible(self):
        "channels must divide into groups"
        self.assertRaises(ContractError, group_norm,
                          Tensor(np.ones((1, 6, 2, 2))), 4,
                          Tensor(np.ones(6)), Tensor(np.zeros(6)))

    def test_default_groups(self):
        "8 groups, clamped to the channel count"
        self.assertEqual(8, default_groups(64))
        self.assertEqual(4, default_groups(4))
        self.assertEqual(6, default_groups(12))

    def test_gradients(self):
        "group_norm passes the finite difference check"
        rng = np.random.default_rng(9)
        proj = rng.normal(size=(2, 4, 3, 3))

        def func(x, gamma, beta):
            return (group_norm(x, 2, gamma, beta) * proj).sum()
        self.assertEqual([], check_gradients(
            func, [rng.normal(size=(2, 4, 3, 3)),
                   rng.normal(size=4), rng.normal(size=4)]))


class SwishTest(unittest.TestCase):
    "swish activation"

    def test_values(self):
        "0, saturation and 1"
        out = swish(Tensor([0.0, 10.0, 1.0])).data
        self.assertEqual(0.0, out[0])
        self.assertAlmostEqual(10.0, out[1], delta=1e-3)
        self.assertAlmostEqual(0.731059, out[2], places=5)

    def test_gradients(self):
        "swish passes the finite difference check"
        rng = np.random.default_rng(10)
        proj = rng.normal(size=(3, 4))
        self.assertEqual([], check_gradients(
            lambda x: (swish(x) * proj).sum(),
            [rng.normal(size=(3, 4)) * 3]))


class UpsampleTest(unittest.TestCase):
    "nearest neighbour upsampling"

    def test_single(self):
        "one pixel becomes a 2x2 block"
        out = nearest_upsample2x(Tensor([[[[3.5]]]])).data
        np.testing.assert_array_equal(out, np.full((1, 1, 2, 2), 3.5))

    def test_blocks(self):
        "2x2 becomes 4x4 in constant blocks"
        out = nearest_upsample2x(Tensor([[[[1, 2], [3, 4]]]])).data
        expected = [[1, 1, 2, 2],
                    [1, 1, 2, 2],
                    [3, 3, 4, 4],
                    [3, 3, 4, 4]]
        np.testing.assert_array_equal(out[0, 0], expected)

    def test_backward(self):
        "gradient sums over the block"
        x = Tensor(np.ones((1, 2, 3, 3)), requires_grad=True)
        with GradientTape():
            loss = nearest_upsample2x(x).sum()
        backward(loss)
        np.testing.assert_array_equal(x.grad, 4.0)


class AttentionTest(unittest.TestCase):
    "single head attention"

    def test_constant_keys(self):
        "spatially constant key/value source: same attended term everywhere"
        rng = np.random.default_rng(11)
        weights = random_attention_weights(rng, 2)
        q_src = rng.normal(size=(1, 2, 3, 3))
        kv_src = np.ones((1, 2, 2, 2)) * rng.normal(size=(1, 2, 1, 1))
        out = attention(Tensor(q_src), Tensor(kv_src), weights).data
        attended = out - q_src.astype(np.float32)
        flat = attended.reshape(2, -1)
        np.testing.assert_allclose(flat, flat[:, :1].repeat(9, axis=1),
                                   atol=1e-5)

    def test_zero_output(self):
        "zero output projection leaves the query source unchanged"
        rng = np.random.default_rng(12)
        weights = random_attention_weights(rng, 2, zero_out=True)
        q_src = Tensor(rng.normal(size=(1, 2, 2, 2)))
        out = attention(q_src, Tensor(rng.normal(size=(1, 2, 2, 2))),
                        weights)
        np.testing.assert_array_equal(out.data, q_src.data)

    def test_oracle(self):
        "matches an explicit softmax matrix product"
        rng = np.random.default_rng(13)
        weights = random_attention_weights(rng, 2)
        q_src = rng.normal(size=(1, 2, 2, 2)).astype(np.float32)
        kv_src = rng.normal(size=(1, 2, 2, 2)).astype(np.float32)
        out = attention(Tensor(q_src), Tensor(kv_src), weights).data
        np.testing.assert_allclose(out, naive_attention(q_src, kv_src,
                                                        weights),
                                   atol=1e-5)

    def test_rows_sum_to_one(self):
        "softmax rows of the attention matrix sum to one"
        rng = np.random.default_rng(14)
        weights = random_attention_weights(rng, 4, scale=2.0)
        _, attn = attention(Tensor(rng.normal(size=(2, 4, 4, 4))),
                            Tensor(rng.normal(size=(2, 4, 2, 2))),
                            weights, return_attention=True)
        self.assertEqual((2, 16, 4), attn.shape)
        np.testing.assert_allclose(attn.data.sum(axis=-1), 1.0, atol=1e-5)

    def test_channel_mismatch(self):
        "queries and keys must project to the same width"
        rng = np.random.default_rng(15)
        weights = random_attention_weights(rng, 2)
        weights = weights._replace(wk=np.ones((3, 2, 1, 1)),
                                   bk=np.zeros(3))
        self.assertRaises(ContractError, attention,
                          Tensor(np.ones((1, 2, 2, 2))),
                          Tensor(np.ones((1, 2, 2, 2))), weights)

    def test_gradients(self):
        "attention passes the finite difference check"
        rng = np.random.default_rng(16)
        proj = rng.normal(size=(1, 2, 2, 2))
        arrays = [rng.normal(size=(1, 2, 2, 2)),
                  rng.normal(size=(1, 2, 3, 3))] +\
            list(random_attention_weights(rng, 2))

        def func(q_src, kv_src, *weights):
            out = attention(q_src, kv_src, AttentionWeights(*weights))
            return (out * proj).sum()
        self.assertEqual([], check_gradients(func, arrays))


class SoftmaxLinearTest(unittest.TestCase):
    "softmax and linear"

    def test_softmax_gradients(self):
        "softmax passes the finite difference check"
        rng = np.random.default_rng(17)
        proj = rng.normal(size=(2, 5))
        self.assertEqual([], check_gradients(
            lambda x: (softmax(x) * proj).sum(), [rng.normal(size=(2, 5))]))

    def test_linear_gradients(self):
        "linear passes the finite difference check"
        rng = np.random.default_rng(18)
        proj = rng.normal(size=(3, 2))
        self.assertEqual([], check_gradients(
            lambda x, w, b: (linear(x, w, b) * proj).sum(),
            [rng.normal(size=(3, 4)), rng.normal(size=(2, 4)),
             rng.normal(size=2)]))


# ---------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------

class AdamTest(unittest.TestCase):
    "Adam updates"

    def test_zero_grad(self):
        "zero gradients leave parameters alone"
        w = Tensor([1.0, -1.0], requires_grad=True)
        w.grad = np.zeros(2, dtype=np.float32)
        adam_step([w], AdamState(lr=0.1))
        np.testing.assert_array_equal(w.data, [1.0, -1.0])

    def test_first_step(self):
        "first step moves by about lr against the gradient"
        w = Tensor([0.5], requires_grad=True)
        w.grad = np.ones(1, dtype=np.float32)
        state = AdamState(lr=1e-3)
        adam_step([w], state)
        self.assertLess(abs((0.5 - w.data[0]) - 1e-3), 1e-6)
        self.assertEqual(1, state.step)

    def test_quadratic(self):
        "100 steps on w^2 from 1 bring |w| below 0.5"
        w = Tensor([1.0], requires_grad=True)
        state = AdamState(lr=0.1)
        for _ in range(100):
            with GradientTape():
                loss = (w * w).sum()
            backward(loss)
            adam_step([w], state)
        self.assertLess(abs(w.data[0]), 0.5)
        self.assertEqual(100, state.step)

    def test_missing_grad(self):
        "parameters without gradients are refused"
        w = Tensor([1.0], requires_grad=True)
        self.assertRaises(ContractError, adam_step, [w], AdamState())

    def test_grads_untouched(self):
        "the step leaves gradients for the caller"
        w = Tensor([1.0], requires_grad=True)
        w.grad = np.full(1, 0.5, dtype=np.float32)
        adam_step([w], AdamState())
        np.testing.assert_array_equal(w.grad, [0.5])


# ---------------------------------------------------------------------
# initialisation
# ---------------------------------------------------------------------

class InitTest(unittest.TestCase):
    def test_truncated_normal(self):
        "trainable, within two standard deviations, seeded"
        weight = truncated_normal((8, 4, 3, 3), 36, np.random.default_rng(5))
        self.assertTrue(weight.requires_grad)
        self.assertEqual((8, 4, 3, 3), weight.shape)
        self.assertLessEqual(np.abs(weight.data).max(), 2.0 / 6 + 1e-6)
        again = truncated_normal((8, 4, 3, 3), 36, np.random.default_rng(5))
        np.testing.assert_array_equal(weight.data, again.data)

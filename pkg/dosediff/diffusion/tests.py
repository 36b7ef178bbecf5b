# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for dosediff.diffusion
"""

from types import SimpleNamespace
import unittest

import numpy as np

from .process import (DoseScaler, forward_sample, forward_step, noise,
                      posterior_mean, predict_dose, reverse_step, sample)
from .schedule import NoiseSchedule, build_schedule
from .training import (DivergenceError, train_diffusion, training_step,
                       validation_loss)
from ..internalutil import ContractError, seeded_rng
from ..numerics.optim import AdamState
from ..numerics.tensor import Tensor, add, precision


# ---------------------------------------------------------------------
# fake models
# ---------------------------------------------------------------------

class ConstantModel(object):
    """
    Predicts a constant noise estimate; the single parameter is an
    offset (zero to start with)
    """
    def __init__(self, value=0.0):
        self.value = value
        self.offset = Tensor(np.zeros(1), requires_grad=True)

    def parameters(self):
        return [self.offset]

    def condition(self, x):
        return x

    def predict(self, cond, y_t, gamma):
        return add(Tensor(np.full(y_t.shape, self.value)), self.offset)


class OracleModel(ConstantModel):
    """
    Conditioned on the clean dose map itself, recovers the noise exactly
    from y_t and the noise intensity
    """
    def predict(self, cond, y_t, gamma):
        gamma = np.asarray(gamma, dtype=np.float64).reshape(-1, 1, 1, 1)
        eps = (y_t.data - np.sqrt(gamma) * cond.data) / np.sqrt(1.0 - gamma)
        return add(Tensor(eps), self.offset)


class LinearModel(ConstantModel):
    "noise estimate depending on both the conditioning and y_t"
    def predict(self, cond, y_t, gamma):
        gamma = np.asarray(gamma).reshape(-1, 1, 1, 1)
        est = 0.3 * y_t.data + 0.1 * cond.data.mean(axis=1, keepdims=True) \
            + gamma
        return add(Tensor(est), self.offset)


def tiny_config(**kwargs):
    "the training attributes `train_diffusion` reads"
    fields = dict(epochs=2, batch_size=2, lr=1e-3, lr_drop_epoch=-1,
                  lr_dropped=1e-4, patience=0, seed=7)
    fields.update(kwargs)
    return SimpleNamespace(**fields)


# ---------------------------------------------------------------------
# schedule
# ---------------------------------------------------------------------

class ScheduleTest(unittest.TestCase):
    def test_single_step(self):
        "T = 1 with a constant variance"
        sched = build_schedule(1, 0.01, 0.01)
        self.assertEqual(1, sched.T)
        np.testing.assert_allclose([0.01], sched.beta)
        np.testing.assert_allclose([0.99], sched.alpha)
        np.testing.assert_allclose([0.99], sched.gamma)
        np.testing.assert_allclose([0.1], sched.sigma)

    def test_decaying_endpoints(self):
        "variances from 1e-2 down to 1e-4 over 1000 steps"
        sched = build_schedule(1000, 1e-2, 1e-4)
        self.assertAlmostEqual(1e-2, sched.at('beta', 1))
        self.assertAlmostEqual(1e-4, sched.at('beta', 1000))
        self.assertAlmostEqual(1e-2 - 499.0 / 999 * (1e-2 - 1e-4),
                               sched.at('beta', 500), delta=1e-8)

    def test_gamma_fold(self):
        "gamma matches a left fold of alpha and decreases strictly"
        for start, end in [(1e-2, 1e-4), (1e-4, 2e-2)]:
            sched = build_schedule(1000, start, end)
            running = 1.0
            for alpha in sched.alpha:
                running *= alpha
            self.assertLess(abs(sched.gamma[-1] - running) / running, 1e-7)
            self.assertTrue(np.all(np.diff(sched.gamma) < 0))
            np.testing.assert_allclose(sched.gamma[1:] / sched.gamma[:-1],
                                       sched.alpha[1:], rtol=1e-7)
            np.testing.assert_allclose(sched.sigma ** 2, sched.beta)

    def test_bad_variances(self):
        "variances must lie strictly within (0, 1)"
        self.assertRaises(ContractError, build_schedule, 10, 0.0, 0.1)
        self.assertRaises(ContractError, build_schedule, 10, 0.1, 1.0)
        self.assertRaises(ContractError, build_schedule, 0, 0.1, 0.1)
        self.assertRaises(ContractError, NoiseSchedule, [0.5, 1.5])

    def test_step_range(self):
        "steps are 1-based and bounded by T"
        sched = build_schedule(5, 0.1, 0.2)
        self.assertRaises(ContractError, sched.at, 'beta', 0)
        self.assertRaises(ContractError, sched.at, 'beta', 6)
        np.testing.assert_allclose(sched.beta[[0, 4]],
                                   sched.at('beta', np.array([1, 5])))


# ---------------------------------------------------------------------
# forward process
# ---------------------------------------------------------------------

class ForwardTest(unittest.TestCase):
    def test_zero_noise(self):
        "without noise the sample is the scaled clean map"
        sched = build_schedule(10, 0.05, 0.1)
        y0 = np.linspace(-1, 1, 16).reshape(1, 1, 4, 4)
        out = forward_sample(y0, 4, np.zeros_like(y0), sched)
        np.testing.assert_allclose(np.sqrt(sched.gamma[3]) * y0, out.data,
                                   rtol=1e-6, atol=1e-7)

    def test_vanishing_variance(self):
        "tiny variances leave the map almost untouched"
        sched = build_schedule(3, 1e-8, 1e-8)
        y0 = np.ones((2, 1, 2, 2))
        eps = np.ones_like(y0)
        out = forward_sample(y0, 3, eps, sched)
        np.testing.assert_allclose(y0, out.data, atol=1e-3)

    def test_closed_form_matches_chain(self):
        "iterating single steps without noise gives the closed form"
        with precision(np.float64):
            sched = build_schedule(100, 1e-2, 1e-4)
            y0 = seeded_rng(1).standard_normal((2, 1, 4, 4))
            zero = np.zeros_like(y0)
            for t in [1, 2, 17, 100]:
                chain = Tensor(y0)
                for step in range(1, t + 1):
                    chain = forward_step(chain, step, zero, sched)
                closed = forward_sample(y0, t, zero, sched)
                np.testing.assert_allclose(closed.data, chain.data,
                                           atol=1e-6)

    def test_scalar_step(self):
        "alpha = 0.99, no noise"
        sched = NoiseSchedule([0.01])
        out = forward_step(Tensor(1.0), 1, Tensor(0.0), sched)
        self.assertAlmostEqual(0.994987, out.item(), places=6)

    def test_chain_moments(self):
        "10,000 noisy chains have the closed form mean and variance"
        sched = build_schedule(10, 0.02, 0.1)
        rng = seeded_rng(2024)
        n_draws = 10000
        with precision(np.float64):
            chain = Tensor(np.ones(n_draws))
            for step in range(1, 11):
                chain = forward_step(chain, step,
                                     rng.standard_normal(n_draws), sched)
        gamma = sched.gamma[-1]
        stderr = np.sqrt((1.0 - gamma) / n_draws)
        self.assertLess(abs(chain.data.mean() - np.sqrt(gamma)),
                        4 * stderr)
        self.assertLess(abs(chain.data.var() / (1.0 - gamma) - 1.0), 0.1)

    def test_per_element_steps(self):
        "one step per batch element"
        sched = build_schedule(10, 0.05, 0.1)
        y0 = np.ones((3, 1, 2, 2))
        steps = np.array([1, 5, 10])
        out = forward_sample(y0, steps, np.zeros_like(y0), sched)
        for i, step in enumerate(steps):
            np.testing.assert_allclose(np.sqrt(sched.gamma[step - 1]),
                                       out.data[i], rtol=1e-6)

    def test_noise(self):
        "noise() reports the realised noise"
        sched = build_schedule(10, 0.05, 0.1)
        y0 = np.zeros((1, 1, 4, 4))
        drawn = noise(y0, 10, sched, seeded_rng(3))
        self.assertEqual(10, drawn.t)
        np.testing.assert_allclose(
            np.sqrt(1.0 - sched.gamma[-1]) * drawn.epsilon.data,
            drawn.y_t.data, rtol=1e-6, atol=1e-7)

    def test_contract(self):
        "out of range steps and mismatched noise are rejected"
        sched = build_schedule(10, 0.05, 0.1)
        y0 = np.zeros((1, 1, 4, 4))
        self.assertRaises(ContractError, forward_sample, y0, 11,
                          np.zeros_like(y0), sched)
        self.assertRaises(ContractError, forward_step, y0, 0,
                          np.zeros_like(y0), sched)
        self.assertRaises(ContractError, forward_sample, y0, 1,
                          np.zeros((1, 1, 4, 5)), sched)


# ---------------------------------------------------------------------
# reverse process
# ---------------------------------------------------------------------

class ReverseTest(unittest.TestCase):
    def test_zero_estimate(self):
        "with no noise estimate the mean just rescales"
        sched = build_schedule(10, 0.05, 0.1)
        y_t = np.linspace(-2, 2, 9).reshape(1, 1, 3, 3)
        out = posterior_mean(y_t, np.zeros_like(y_t), 6, sched)
        np.testing.assert_allclose(y_t / np.sqrt(sched.alpha[5]), out.data,
                                   rtol=1e-6, atol=1e-7)

    def test_perfect_estimate(self):
        "the exact noise undoes the first forward step"
        sched = build_schedule(10, 0.05, 0.1)
        rng = seeded_rng(5)
        y0 = rng.uniform(-1, 1, (2, 1, 4, 4))
        eps = rng.standard_normal(y0.shape)
        y_1 = forward_sample(y0, 1, eps, sched)
        out = reverse_step(y_1, eps, np.zeros_like(y0), 1, sched)
        np.testing.assert_allclose(y0, out.data, atol=1e-5)

    def test_scalar_mean(self):
        "alpha = 0.99 and gamma = 0.9"
        sched = NoiseSchedule([1.0 - 0.9 / 0.99, 0.01])
        out = posterior_mean(Tensor(1.0), Tensor(1.0), 2, sched)
        expected = (1.0 - 0.01 / np.sqrt(0.1)) / np.sqrt(0.99)
        self.assertAlmostEqual(expected, out.item(), places=6)
        self.assertAlmostEqual(0.97325, out.item(), places=4)

    def test_scalar_noise(self):
        "the reverse noise is scaled by sqrt(beta)"
        sched = NoiseSchedule([0.01, 0.01])
        out = reverse_step(Tensor(0.0), Tensor(0.0), Tensor(1.0), 2, sched)
        self.assertAlmostEqual(0.1, out.item(), places=6)

    def test_zero_z(self):
        "z = 0 is the posterior mean"
        sched = build_schedule(10, 0.05, 0.1)
        rng = seeded_rng(6)
        y_t = rng.standard_normal((1, 1, 4, 4))
        eps_hat = rng.standard_normal((1, 1, 4, 4))
        mean = posterior_mean(y_t, eps_hat, 4, sched)
        for z in [None, np.zeros_like(y_t)]:
            out = reverse_step(y_t, eps_hat, z, 4, sched)
            np.testing.assert_array_equal(mean.data, out.data)

    def test_final_step_noise(self):
        "the last step refuses noise"
        sched = build_schedule(10, 0.05, 0.1)
        y_t = np.zeros((2, 1, 2, 2))
        self.assertRaises(ContractError, reverse_step, y_t, y_t,
                          np.ones_like(y_t), 1, sched)
        self.assertRaises(ContractError, reverse_step, y_t, y_t,
                          np.ones_like(y_t), np.array([1, 3]), sched)
        self.assertRaises(ContractError, posterior_mean, y_t, y_t, 0, sched)


class SampleTest(unittest.TestCase):
    def test_single_step_chain(self):
        "T = 1 with a zero predictor only rescales the initial draw"
        sched = NoiseSchedule([0.01])
        x = np.zeros((2, 3, 4, 4))
        out = sample(x, ConstantModel(), sched, seeded_rng(11))
        y_T = seeded_rng(11).standard_normal((2, 1, 4, 4))
        np.testing.assert_allclose(y_T / np.sqrt(0.99), out.data,
                                   rtol=1e-5, atol=1e-6)

    def test_deterministic(self):
        "same seed, same output bits"
        sched = build_schedule(20, 1e-2, 1e-4)
        x = seeded_rng(1).uniform(size=(2, 3, 8, 8))
        first = sample(x, LinearModel(), sched, seeded_rng(9))
        second = sample(x, LinearModel(), sched, seeded_rng(9))
        third = sample(x, LinearModel(), sched, seeded_rng(10))
        self.assertEqual((2, 1, 8, 8), first.shape)
        np.testing.assert_array_equal(first.data, second.data)
        self.assertFalse(np.array_equal(first.data, third.data))

    def test_predict_dose(self):
        "doses are clamped to [0, dose_max]"
        sched = build_schedule(5, 0.1, 0.2)
        scaler = DoseScaler(2.0)
        x = np.zeros((1, 2, 4, 4))
        dose = predict_dose(ConstantModel(), x, sched, scaler,
                            seeded_rng(4))
        self.assertEqual(np.float32, dose.dtype)
        self.assertTrue(np.all(dose >= 0) and np.all(dose <= 2.0))


class DoseScalerTest(unittest.TestCase):
    def test_range(self):
        "[0, dose_max] maps onto [-1, 1]"
        scaler = DoseScaler(2.5)
        np.testing.assert_allclose([-1, 0, 1],
                                   scaler.normalize([0, 1.25, 2.5]))
        np.testing.assert_allclose([0, 1.25, 2.5, 0, 2.5],
                                   scaler.denormalize([-1, 0, 1, -3, 4]))
        self.assertRaises(ContractError, DoseScaler, 0)


# ---------------------------------------------------------------------
# training
# ---------------------------------------------------------------------

class TrainingStepTest(unittest.TestCase):
    def setUp(self):
        self.sched = build_schedule(50, 1e-2, 1e-4)
        rng = seeded_rng(0)
        self.y0 = rng.uniform(-1, 1, (4, 1, 32, 32))

    def test_oracle(self):
        "a model that knows the noise has no loss"
        model = OracleModel()
        loss = training_step(self.y0, self.y0, model, self.sched,
                             AdamState(), seeded_rng(1))
        self.assertLess(loss, 1e-4)

    def test_zero_model(self):
        "predicting zero costs the mean absolute normal draw"
        model = ConstantModel()
        loss = training_step(self.y0, self.y0, model, self.sched,
                             AdamState(), seeded_rng(2))
        self.assertAlmostEqual(np.sqrt(2 / np.pi), loss, delta=0.05)

    def test_updates_parameters(self):
        "one Adam step moves the parameters, not the inputs"
        model = ConstantModel(value=5.0)
        opt = AdamState(lr=1e-3)
        x_before = self.y0.copy()
        beta_before = self.sched.beta.copy()
        training_step(self.y0, self.y0, model, self.sched, opt,
                      seeded_rng(3))
        self.assertEqual(1, opt.step)
        self.assertNotEqual(0.0, model.offset.data[0])
        np.testing.assert_array_equal(x_before, self.y0)
        np.testing.assert_array_equal(beta_before, self.sched.beta)

    def test_divergence(self):
        "non-finite losses abort before touching the parameters"
        model = ConstantModel(value=np.nan)
        opt = AdamState()
        self.assertRaises(DivergenceError, training_step, self.y0, self.y0,
                          model, self.sched, opt, seeded_rng(4))
        self.assertEqual(0, opt.step)
        self.assertEqual(0.0, model.offset.data[0])

    def test_mismatched_batch(self):
        "structure and dose batches must line up"
        self.assertRaises(ContractError, training_step,
                          np.zeros((3, 2, 32, 32)), self.y0, ConstantModel(),
                          self.sched, AdamState(), seeded_rng(5))


class TrainDiffusionTest(unittest.TestCase):
    def setUp(self):
        self.sched = build_schedule(10, 1e-2, 1e-4)
        rng = seeded_rng(0)
        self.xs = rng.uniform(size=(4, 2, 8, 8))
        self.ys = rng.uniform(-1, 1, (4, 1, 8, 8))

    def test_curve(self):
        "one row per step, validation loss on the last step of each epoch"
        epochs = []
        curve = train_diffusion(ConstantModel(), self.xs, self.ys,
                                self.sched, tiny_config(),
                                val_data=(self.xs[:2], self.ys[:2]),
                                on_epoch=lambda e, _: epochs.append(e))
        self.assertEqual(4, len(curve))
        self.assertEqual([0, 1], epochs)
        self.assertEqual([None, 'set', None, 'set'],
                         [None if r.val_loss is None else 'set'
                          for r in curve.rows])
        self.assertEqual(list(range(1, 5)), [r.step for r in curve.rows])

    def test_learning_rate_drop(self):
        "the step schedule applies per epoch"
        curve = train_diffusion(ConstantModel(), self.xs, self.ys,
                                self.sched,
                                tiny_config(epochs=3, lr_drop_epoch=1))
        self.assertEqual([1e-3, 1e-3, 1e-4, 1e-4, 1e-4, 1e-4],
                         [r.lr for r in curve.rows])

    def test_early_stopping(self):
        "a frozen model stops after `patience` stale epochs"
        model = ConstantModel()
        model.parameters = lambda: []
        curve = train_diffusion(model, self.xs, self.ys, self.sched,
                                tiny_config(epochs=10, patience=2),
                                val_data=(self.xs, self.ys))
        # epoch 0 sets the best, epochs 1 and 2 are stale
        self.assertEqual(3 * 2, len(curve))

    def test_validation_deterministic(self):
        "fixed seed, fixed validation loss"
        config = tiny_config()
        first = validation_loss(ConstantModel(), self.xs, self.ys,
                                self.sched, config, 3)
        second = validation_loss(ConstantModel(), self.xs, self.ys,
                                 self.sched, config, 3)
        self.assertEqual(first, second)

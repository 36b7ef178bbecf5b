# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for dosediff.networks
"""

import re
from types import SimpleNamespace
import unittest

import numpy as np

from .baseline import BaselineUNet, baseline_unet_predict, train_baseline
from .encoder import (StructureEncoder, encode_structure,
                      pretrain_structure_encoder)
from .layers import AttentionBlock, NoiseLevelEmbedding, ResBlock
from .model import (DiffusionModel, build_baseline, build_encoder,
                    build_for_kind, build_model, kind_of_names)
from .predictor import NoisePredictor, predict_noise
from ..diffusion.schedule import build_schedule
from ..diffusion.training import training_step
from ..internalutil import ContractError, seeded_rng
from ..learning import LossCurve
from ..numerics.gradcheck import check_tensor_gradients
from ..numerics.optim import AdamState
from ..numerics.tensor import GradientTape, Tensor, precision

WIDTHS = (4, 4, 8, 8, 8, 8)


def tiny_config(**kwargs):
    "the configuration attributes the networks read, at toy size"
    fields = dict(widths=WIDTHS, emb_dim=8, n_oars=4,
                  conditioning='fusion', seed=0, dose_max=2.0, lr=1e-2,
                  batch_size=4, pretrain_epochs=0, epochs=0, patience=0,
                  lr_drop_epoch=-1, lr_dropped=1e-3)
    fields.update(kwargs)
    return SimpleNamespace(**fields)


def random_structures(rng, n_batch, size):
    "CT-like channel plus six binary masks worth of channels"
    x = (rng.uniform(size=(n_batch, 6, size, size)) > 0.5).astype(float)
    x[:, 0] = rng.uniform(size=(n_batch, size, size))
    return x


def weighted_sum(out, weights):
    "a scalar reduction that does not cancel out by symmetry"
    return (out * weights).sum()


# ---------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------

class ModuleTest(unittest.TestCase):
    def test_parameter_names(self):
        "names are unique attribute paths in definition order"
        block = ResBlock(4, 8, seeded_rng(0), emb_channels=6)
        names = [name for name, _ in block.named_parameters()]
        self.assertEqual(len(names), len(set(names)))
        self.assertEqual('block1.conv.weight', names[0])
        self.assertIn('emb_proj.weight', names)
        self.assertIn('skip.weight', names)
        same = ResBlock(4, 4, seeded_rng(0))
        self.assertNotIn('skip.weight',
                         [name for name, _ in same.named_parameters()])

    def test_state_round_trip(self):
        "state dicts load back into a differently seeded module"
        first = StructureEncoder(6, WIDTHS, seeded_rng(1))
        second = StructureEncoder(6, WIDTHS, seeded_rng(2))
        second.load_state_dict(first.state_dict())
        for (_, one), (_, two) in zip(first.named_parameters(),
                                      second.named_parameters()):
            np.testing.assert_array_equal(one.data, two.data)

    def test_load_is_atomic(self):
        "bad shapes or names leave the module untouched"
        enc = StructureEncoder(6, WIDTHS, seeded_rng(1))
        before = enc.state_dict()
        arrays = enc.state_dict()
        arrays['in_conv.bias'] = np.ones(4)
        arrays['stages.4.res.block2.conv.weight'] = np.ones((1, 1, 3, 3))
        self.assertRaises(ContractError, enc.load_state_dict, arrays)
        arrays = enc.state_dict()
        arrays['bogus'] = np.ones(1)
        self.assertRaises(ContractError, enc.load_state_dict, arrays)
        for name, value in enc.state_dict().items():
            np.testing.assert_array_equal(before[name], value)


class ResBlockTest(unittest.TestCase):
    def test_zero_convolutions(self):
        "zero conv weights leave only the identity skip"
        block = ResBlock(4, 4, seeded_rng(0))
        for name, param in block.named_parameters():
            if name.endswith('conv.weight'):
                param.data[...] = 0
        x = seeded_rng(1).normal(size=(2, 4, 8, 8))
        np.testing.assert_allclose(x, block(Tensor(x)).data, rtol=1e-6)

    def test_shapes(self):
        "spatial size kept, channels changed"
        block = ResBlock(4, 8, seeded_rng(0), emb_channels=6)
        emb = Tensor(np.ones((2, 6)))
        out = block(Tensor(np.ones((2, 4, 8, 8))), emb)
        self.assertEqual((2, 8, 8, 8), out.shape)

    def test_needs_embedding(self):
        "a conditioned block refuses to run without an embedding"
        block = ResBlock(4, 4, seeded_rng(0), emb_channels=6)
        self.assertRaises(ContractError, block, Tensor(np.ones((1, 4, 8, 8))))


class EmbeddingTest(unittest.TestCase):
    def test_distinct(self):
        "different noise levels, different embeddings; same, same"
        emb = NoiseLevelEmbedding(8, seeded_rng(0))
        out = emb(np.array([0.9, 0.5, 0.9])).data
        self.assertEqual((3, 32), out.shape)
        self.assertGreater(np.abs(out[0] - out[1]).max(), 1e-6)
        np.testing.assert_array_equal(out[0], out[2])

    def test_odd_size(self):
        "the sinusoid count must be even"
        self.assertRaises(ContractError, NoiseLevelEmbedding, 7,
                          seeded_rng(0))


class AttentionBlockTest(unittest.TestCase):
    def test_identity_at_init(self):
        "the zero output projection makes a fresh block the identity"
        block = AttentionBlock(8, seeded_rng(0), context_channels=4)
        x = seeded_rng(1).normal(size=(2, 8, 4, 4))
        ctx = seeded_rng(2).normal(size=(2, 4, 2, 2))
        np.testing.assert_array_equal(
            Tensor(x).data, block(Tensor(x), Tensor(ctx)).data)


# ---------------------------------------------------------------------
# structure encoder
# ---------------------------------------------------------------------

class StructureEncoderTest(unittest.TestCase):
    def test_level_sizes(self):
        "64x64 input, six levels"
        enc = StructureEncoder(6, WIDTHS, seeded_rng(0))
        levels = encode_structure(enc, np.zeros((1, 6, 64, 64)))
        self.assertEqual([64, 32, 16, 8, 4, 4],
                         [level.shape[-1] for level in levels])
        self.assertEqual(list(WIDTHS), [level.shape[1] for level in levels])

    def test_zero_weights(self):
        "zero parameters, zero features"
        enc = StructureEncoder(6, WIDTHS, seeded_rng(0))
        for param in enc.parameters():
            param.data[...] = 0
        x = random_structures(seeded_rng(1), 2, 32)
        for level in enc(x):
            self.assertFalse(np.any(level.data))

    def test_indivisible(self):
        "sizes must be multiples of 16"
        enc = StructureEncoder(6, WIDTHS, seeded_rng(0))
        self.assertRaises(ContractError, enc, np.zeros((1, 6, 24, 24)))
        self.assertRaises(ContractError, enc, np.zeros((1, 5, 32, 32)))

    def test_deterministic(self):
        "same weights, same input, same bits"
        enc = StructureEncoder(6, WIDTHS, seeded_rng(0))
        x = random_structures(seeded_rng(1), 2, 16)
        for one, two in zip(enc(x), enc(x)):
            self.assertEqual(one.data.tobytes(), two.data.tobytes())

    def test_gradients(self):
        "input gradients of all levels match finite differences"
        rng = seeded_rng(3)
        with precision(np.float64):
            enc = StructureEncoder(6, WIDTHS, seeded_rng(0))
            x = Tensor(random_structures(rng, 1, 16), requires_grad=True)
            weights = [Tensor(rng.normal(size=level.shape))
                       for level in enc(x)]

        def loss_fn():
            total = None
            for level, weight in zip(enc(x), weights):
                term = weighted_sum(level, weight)
                total = term if total is None else total + term
            return total
        mismatches = check_tensor_gradients(loss_fn, [x], h=1e-5,
                                            per_tensor=80)
        self.assertEqual([], mismatches)


class PretrainTest(unittest.TestCase):
    def setUp(self):
        rng = seeded_rng(4)
        self.cases = [SimpleNamespace(x=random_structures(rng, 1, 16)[0],
                                      y=np.ones((1, 16, 16)))
                      for _ in range(4)]

    def test_zero_epochs(self):
        "no training, initial weights"
        config = tiny_config()
        enc = StructureEncoder(6, WIDTHS, seeded_rng(0))
        before = enc.state_dict()
        curve = LossCurve()
        out = pretrain_structure_encoder(self.cases, config, encoder=enc,
                                         curve=curve)
        self.assertIs(enc, out)
        self.assertEqual(0, len(curve))
        for name, value in out.state_dict().items():
            np.testing.assert_array_equal(before[name], value)

    def test_constant_dose(self):
        "a constant dose is learnt to within 0.05 and the L1 drops by 30%"
        cases = [SimpleNamespace(x=case.x, y=np.full((1, 16, 16), 1.5))
                 for case in self.cases[:2]]
        config = tiny_config(pretrain_epochs=200, batch_size=2,
                             lr_drop_epoch=150)
        curve = LossCurve()
        enc = pretrain_structure_encoder(cases, config, curve=curve)
        self.assertIsInstance(enc, StructureEncoder)
        self.assertEqual(200, len(curve))
        self.assertGreaterEqual(curve.relative_drop(head=5, tail=10), 0.3)
        self.assertLess(curve.losses()[-10:].mean(), 0.05)

    def test_learning_rate_drop(self):
        "pretraining follows the step schedule"
        config = tiny_config(pretrain_epochs=3, lr_drop_epoch=2)
        curve = LossCurve()
        pretrain_structure_encoder(self.cases, config, curve=curve)
        self.assertEqual([1e-2, 1e-2, 1e-3], [row.lr for row in curve.rows])

    def test_empty(self):
        "nothing to learn from"
        self.assertRaises(ContractError, pretrain_structure_encoder, [],
                          tiny_config())


# ---------------------------------------------------------------------
# noise predictor
# ---------------------------------------------------------------------

def randomise_attention_outputs(model, rng):
    "give every attention block a live output projection"
    for name, param in model.named_parameters():
        if re.search(r'attention(\.\d+)?\.(wo|bo)$', name):
            param.data[...] = rng.normal(scale=0.3, size=param.shape)


class NoisePredictorTest(unittest.TestCase):
    def setUp(self):
        self.model = build_model(tiny_config())
        rng = seeded_rng(5)
        self.x = random_structures(rng, 3, 32)
        self.y_t = rng.normal(size=(3, 1, 32, 32))
        self.gamma = np.array([0.9, 0.5, 0.1])

    def predict(self, x, y_t, gamma):
        return predict_noise(self.model.predictor,
                             encode_structure(self.model.encoder, x),
                             y_t, gamma)

    def test_shape(self):
        "output has the noisy dose map's shape"
        for size in (16, 32, 48):
            y_t = np.zeros((2, 1, size, size))
            out = self.predict(np.zeros((2, 6, size, size)), y_t, 0.5)
            self.assertEqual(y_t.shape, out.shape)

    def test_zero_head(self):
        "zero output layer, zero noise estimate"
        self.model.predictor.head.conv.weight.data[...] = 0
        out = self.predict(self.x, self.y_t, self.gamma)
        self.assertFalse(np.any(out.data))

    def test_batch_equivariance(self):
        "permuting the batch permutes the output"
        order = np.array([2, 0, 1])
        out = self.predict(self.x, self.y_t, self.gamma).data
        permuted = self.predict(self.x[order], self.y_t[order],
                                self.gamma[order]).data
        np.testing.assert_allclose(out[order], permuted, rtol=1e-5,
                                   atol=1e-5)

    def test_noise_level_matters(self):
        "the embedding pathway is live"
        one = self.predict(self.x[:1], self.y_t[:1], [0.9]).data
        two = self.predict(self.x[:1], self.y_t[:1], [0.2]).data
        self.assertGreater(np.abs(one - two).max(), 1e-6)

    def test_level_mismatch(self):
        "wrong number or shape of structure levels"
        levels = encode_structure(self.model.encoder, self.x)
        predictor = self.model.predictor
        self.assertRaises(ContractError, predictor, levels[:5], self.y_t,
                          self.gamma)
        self.assertRaises(ContractError, predictor, levels,
                          self.y_t[:, :, :16, :16], self.gamma)
        self.assertRaises(ContractError, predictor, None, self.y_t,
                          self.gamma)
        self.assertRaises(ContractError, predictor, levels, self.y_t,
                          self.gamma[:2])

    def test_additive_fusion_of_zeros(self):
        "adding zero structure features changes nothing"
        hidden = Tensor(seeded_rng(6).normal(size=(3, 4, 32, 32)))
        zeros = [np.zeros((3, 4, 32, 32))] * 6
        for level in range(3):
            fused = self.model.predictor._fuse(level, hidden, zeros)
            np.testing.assert_array_equal(hidden.data, fused.data)

    def test_concat_variant(self):
        "the concatenating variant has no encoder and no fusion"
        model = build_model(tiny_config(conditioning='concat'))
        self.assertIsNone(model.encoder)
        self.assertEqual(7, model.predictor.in_channels)
        self.assertEqual([], model.predictor.cross_attention)
        out = model.predict(model.condition(self.x), self.y_t, self.gamma)
        self.assertEqual(self.y_t.shape, out.shape)
        self.assertRaises(ContractError, DiffusionModel,
                          model.predictor, None, 'sideways')

    def test_gradients(self):
        "the whole model passes finite difference checks"
        rng = seeded_rng(7)
        with precision(np.float64):
            model = build_model(tiny_config())
            randomise_attention_outputs(model, rng)
            x = Tensor(random_structures(rng, 2, 16), requires_grad=True)
            y_t = Tensor(rng.normal(size=(2, 1, 16, 16)), requires_grad=True)
            weights = Tensor(rng.normal(size=(2, 1, 16, 16)))
        gamma = np.array([0.8, 0.3])

        def loss_fn():
            out = model.predict(model.condition(x), y_t, gamma)
            return weighted_sum(out, weights)
        self.assertEqual([], check_tensor_gradients(loss_fn, [x, y_t],
                                                    h=1e-5, per_tensor=40))
        self.assertEqual([], check_tensor_gradients(loss_fn,
                                                    model.parameters(),
                                                    h=1e-5, per_tensor=2))


# softmax is shift invariant, so the key bias never gets a gradient
KEY_BIAS = re.compile(r'attention(\.\d+)?\.bk$')


class DeadParameterTest(unittest.TestCase):
    def gradients(self, model, rng):
        x = Tensor(random_structures(rng, 2, 32))
        y_t = Tensor(rng.normal(size=(2, 1, 32, 32)))
        weights = Tensor(rng.normal(size=(2, 1, 32, 32)))
        params = model.parameters()
        with GradientTape() as tape:
            out = model.predict(model.condition(x), y_t, [0.7, 0.2])
            loss = weighted_sum(out, weights)
        tape.backward(loss, params=params)
        return dict((name, param.grad)
                    for name, param in model.named_parameters())

    def test_no_dead_parameters(self):
        "every parameter gets a gradient once attention outputs are live"
        model = build_model(tiny_config())
        rng = seeded_rng(8)
        grads = self.gradients(model, rng)
        behind_zero_projection = re.compile(
            r'attention(\.\d+)?\.(norm\.|w[qkv]|b[qkv])|'
            r'^encoder\.stages\.[234]\.')
        for name, grad in grads.items():
            if KEY_BIAS.search(name):
                continue
            if re.search(r'attention(\.\d+)?\.(wo|bo)$', name):
                self.assertTrue(np.any(grad), name)
            elif not behind_zero_projection.search(name):
                self.assertTrue(np.any(grad), name)
        # one optimisation step wakes up what sits behind the projections
        sched = build_schedule(10, 1e-2, 1e-4)
        training_step(random_structures(rng, 2, 32),
                      rng.uniform(-1, 1, (2, 1, 32, 32)), model, sched,
                      AdamState(lr=1e-3), rng)
        for name, grad in self.gradients(model, rng).items():
            if not KEY_BIAS.search(name):
                self.assertTrue(np.any(grad), name)


# ---------------------------------------------------------------------
# baseline and model handles
# ---------------------------------------------------------------------

class BaselineTest(unittest.TestCase):
    def test_zero_head(self):
        "zero final weights, constant output"
        net = BaselineUNet(6, WIDTHS, seeded_rng(0))
        net.head.conv.weight.data[...] = 0
        net.head.conv.bias.data[...] = 0.25
        out = baseline_unet_predict(net, random_structures(seeded_rng(1),
                                                           2, 32))
        self.assertEqual((2, 1, 32, 32), out.shape)
        np.testing.assert_array_equal(np.full(out.shape, 0.25,
                                              dtype=np.float32), out.data)

    def test_training(self):
        "L1 on a constant target goes down"
        rng = seeded_rng(2)
        model = build_baseline(tiny_config())
        xs = random_structures(rng, 4, 16)
        ys = np.full((4, 1, 16, 16), 0.5)
        curve = train_baseline(model, xs, ys, tiny_config(epochs=20),
                               val_data=(xs[:2], ys[:2]))
        self.assertEqual(20, len(curve))
        self.assertLess(curve.losses()[-5:].mean(),
                        curve.losses()[:5].mean())
        self.assertIsNotNone(curve.rows[-1].val_loss)


class ModelKindTest(unittest.TestCase):
    def test_kinds(self):
        "parameter prefixes identify the model kind"
        config = tiny_config()
        for build, kind in [(build_model, 'diffusion'),
                            (build_baseline, 'baseline'),
                            (build_encoder, 'encoder')]:
            model = build(config)
            names = [name for name, _ in model.named_parameters()]
            self.assertEqual(kind, kind_of_names(names))
            self.assertEqual(kind, model.kind)
            rebuilt = build_for_kind(kind, config)
            self.assertEqual(names,
                             [name for name, _ in rebuilt.named_parameters()])
        concat = build_model(tiny_config(conditioning='concat'))
        self.assertEqual('diffusion', kind_of_names(
            [name for name, _ in concat.named_parameters()]))
        self.assertRaises(ContractError, kind_of_names, ['decoder.weight'])
        self.assertRaises(ContractError, build_for_kind, 'gan', config)

    def test_deterministic_init(self):
        "same seed, same weights"
        one = build_model(tiny_config()).state_dict()
        two = build_model(tiny_config()).state_dict()
        for name in one:
            np.testing.assert_array_equal(one[name], two[name])

    def test_predictor_alone(self):
        "the predictor can be built without an encoder for fusion"
        predictor = NoisePredictor(1, WIDTHS, 8, seeded_rng(0))
        self.assertTrue(predictor.fusion)
        self.assertEqual(3, len(predictor.cross_attention))

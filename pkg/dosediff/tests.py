# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for the dosediff helpers shared across packages
"""

import argparse
import os
import shutil
import tempfile
import types
import unittest

import numpy as np

from dosediff.formats.config import RunConfig
from dosediff.internalutil import (ContractError, DosediffError, check,
                                   seeded_rng)
from dosediff.learning import (DivergenceError, EarlyStopping, LossCurve,
                               check_finite, iterate_batches, l1_loss,
                               learning_rate)
from dosediff.numerics.tensor import Tensor
from dosediff.util import add_subcommand, canonical_json


# ---------------------------------------------------------------------
# util
# ---------------------------------------------------------------------

class UtilTest(unittest.TestCase):
    def test_canonical_json(self):
        "sorted keys, trailing newline"
        text = canonical_json({'b': 1, 'a': [1, 2]})
        self.assertTrue(text.endswith('}\n'))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(text, canonical_json({'a': [1, 2], 'b': 1}))

    def test_add_subcommand(self):
        "name, help and epilog from the module"
        module = types.ModuleType('dosediff.cmd.fake')
        module.__doc__ = "\nDo something\n\nAt length.\n"
        module.NAME = 'do-something'
        parser = argparse.ArgumentParser()
        subparsers = parser.add_subparsers(dest='command')
        subparser = add_subcommand(subparsers, module)
        self.assertEqual('At length.', subparser.epilog)
        self.assertEqual('do-something', parser.parse_args(
            ['do-something']).command)

    def test_check(self):
        "contract violations"
        check(True, "never %s", 'raised')
        with self.assertRaises(ContractError) as context:
            check(False, "bad %s", 'value')
        self.assertEqual('bad value', str(context.exception))
        self.assertTrue(issubclass(ContractError, ValueError))
        self.assertTrue(issubclass(ContractError, DosediffError))

    def test_seeded_rng(self):
        "seeds pin the stream"
        self.assertEqual(seeded_rng(1, 2).integers(1 << 30),
                         seeded_rng(1, 2).integers(1 << 30))
        self.assertNotEqual(seeded_rng(1, 2).integers(1 << 30),
                            seeded_rng(2, 1).integers(1 << 30))


# ---------------------------------------------------------------------
# learning
# ---------------------------------------------------------------------

class LearningTest(unittest.TestCase):
    def test_batches(self):
        "a permutation cut into batches"
        batches = list(iterate_batches(7, 3, seeded_rng(0)))
        self.assertEqual([3, 3, 1], [len(batch) for batch in batches])
        self.assertEqual(list(range(7)),
                         sorted(np.concatenate(batches).tolist()))
        self.assertEqual([], list(iterate_batches(0, 3, seeded_rng(0))))
        self.assertRaises(ContractError, list,
                          iterate_batches(3, 0, seeded_rng(0)))

    def test_l1(self):
        "mean absolute error"
        loss = l1_loss(Tensor(np.array([1.0, -1.0, 2.0])),
                       Tensor(np.array([0.0, 0.0, 0.0])))
        self.assertAlmostEqual(4.0 / 3, loss.item(), places=6)

    def test_divergence(self):
        "non-finite losses stop training"
        self.assertEqual(0.5, check_finite(0.5, 1))
        with self.assertRaises(DivergenceError) as context:
            check_finite(float('nan'), 12)
        self.assertEqual(12, context.exception.step)
        self.assertRaises(DivergenceError, check_finite, float('inf'), 1)

    def test_learning_rate(self):
        "step schedule"
        config = RunConfig(lr=1e-4, lr_drop_epoch=3, lr_dropped=5e-5)
        self.assertEqual([1e-4, 1e-4, 1e-4, 5e-5, 5e-5],
                         [learning_rate(config, e) for e in range(5)])
        never = RunConfig(lr_drop_epoch=-1)
        self.assertEqual(never.lr, learning_rate(never, 10000))

    def test_early_stopping(self):
        "stop after `patience` epochs without improvement"
        stopper = EarlyStopping(2)
        self.assertEqual([False, False, False, True],
                         [stopper.update(loss) for loss in [3, 2, 2.5, 2.1]])
        patient = EarlyStopping(0)
        self.assertFalse(any(patient.update(1.0) for _ in range(10)))


class LossCurveTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_dump(self):
        "header, one row per step, validation on epoch ends"
        curve = LossCurve()
        curve.add(0, 1, 0.5, 1e-4)
        curve.add(0, 2, 1.0 / 3, 1e-4)
        curve.set_val_loss(0.25)
        path = os.path.join(self.tmpdir, 'loss_curve.csv')
        curve.dump(path)
        with open(path, 'rb') as stream:
            content = stream.read().decode('utf-8')
        self.assertEqual('epoch,step,loss,lr,val_loss\n'
                         '0,1,0.5,0.0001,\n'
                         '0,2,0.333333333,0.0001,0.25\n', content)

    def test_relative_drop(self):
        "fraction of the loss gone"
        curve = LossCurve()
        for step, loss in enumerate([4.0, 4.0, 2.0, 1.0]):
            curve.add(0, step + 1, loss, 1e-3)
        self.assertAlmostEqual(0.625, curve.relative_drop(head=2, tail=2))
        self.assertRaises(ContractError, LossCurve().relative_drop)

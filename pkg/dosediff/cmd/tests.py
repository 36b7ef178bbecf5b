# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for the dosediff command line tool, on toy settings
"""

import os
import shutil
import tempfile
import unittest

from ..formats.checkpoint_format import load_checkpoint
from ..formats.config import RunConfig
from ..formats.layout import read_splits
from ..metrics.report import CASE_COLUMNS, load_report
from ..networks.model import BaselineModel, DiffusionModel
from .main import run_cli


def toy_config(**kwargs):
    "small enough for the whole pipeline to run in seconds"
    settings = dict(size=32, n_beams=3, n_cases=4, T=5,
                    widths=(4, 4, 8, 8, 8, 8), emb_dim=8, batch_size=2,
                    epochs=1, pretrain_epochs=1, checkpoint_every=1)
    settings.update(kwargs)
    return RunConfig(**settings)


def snapshot(root):
    "relative path -> content of every file under a directory"
    files = {}
    for dirpath, _, filenames in os.walk(root):
        for name in filenames:
            path = os.path.join(dirpath, name)
            with open(path, 'rb') as stream:
                files[os.path.relpath(path, root)] = stream.read()
    return files


class CliTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()
        self.config = os.path.join(self.tmpdir, 'config.json')
        toy_config().dump(self.config)
        self.data = os.path.join(self.tmpdir, 'data')
        self.run = os.path.join(self.tmpdir, 'run')

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def path(self, *parts):
        return os.path.join(self.tmpdir, *parts)

    def cli(self, command, *flags):
        "run a subcommand with the toy configuration, quietly"
        return run_cli(['--quiet', command, '--config', self.config] +
                       list(flags))

    def gen_data(self, out=None, *flags):
        return self.cli('gen-data', '--out', out or self.data, *flags)

    # -----------------------------------------------------------------
    # usage
    # -----------------------------------------------------------------

    def test_usage_errors(self):
        "argparse errors exit with 2"
        self.assertEqual(2, run_cli([]))
        self.assertEqual(2, run_cli(['no-such-command']))
        self.assertEqual(2, run_cli(['gen-data', '--no-such-flag']))
        self.assertEqual(2, run_cli(['gen-data', '--cases', 'four']))

    def test_diagnostics(self):
        "failures exit with 1"
        self.assertEqual(1, run_cli(['--quiet', 'train', '--config',
                                     self.path('missing.json')]))
        self.assertEqual(1, self.cli('train', '--data', self.path('nowhere'),
                                     '--out', self.run))
        with open(self.config, 'w') as stream:
            stream.write('{"epocs": 3}')
        self.assertEqual(1, self.gen_data())
        self.assertFalse(os.path.exists(self.data))

    def test_bad_size(self):
        "sizes must be multiples of 16"
        self.assertEqual(1, self.gen_data(None, '--size', '40'))

    # -----------------------------------------------------------------
    # gen-data
    # -----------------------------------------------------------------

    def test_gen_data(self):
        "case directories, splits and configuration"
        self.assertEqual(0, self.gen_data(None, '--cases', '4', '--seed',
                                          '7'))
        files = snapshot(self.data)
        for index in range(4):
            for name in ('x.ddtf', 'y.ddtf', 'meta.json'):
                self.assertIn(os.path.join('case_%04d' % index, name), files)
        splits = read_splits(self.data)
        self.assertEqual([2, 1, 1], [len(splits[name])
                                     for name in ('train', 'val', 'test')])
        saved = RunConfig.load(os.path.join(self.data, 'config.json'))
        self.assertEqual(7, saved.seed)
        self.assertEqual(32, saved.size)

    def test_gen_data_deterministic(self):
        "same flags, fresh directories, same bytes"
        first, second = self.path('one'), self.path('two')
        self.assertEqual(0, self.gen_data(first, '--cases', '4', '--seed',
                                          '7'))
        self.assertEqual(0, self.gen_data(second, '--cases', '4', '--seed',
                                          '7', '--jobs', '2'))
        self.assertEqual(snapshot(first), snapshot(second))
        third = self.path('three')
        self.assertEqual(0, self.gen_data(third, '--cases', '4', '--seed',
                                          '8'))
        self.assertNotEqual(snapshot(first), snapshot(third))

    # -----------------------------------------------------------------
    # training
    # -----------------------------------------------------------------

    def test_zero_epochs(self):
        "initial weights and an empty loss curve"
        self.assertEqual(0, self.gen_data())
        self.assertEqual(0, self.cli('train', '--data', self.data, '--out',
                                     self.run, '--epochs', '0'))
        model, _ = load_checkpoint(os.path.join(self.run, 'model.ddpx'))
        self.assertIsInstance(model, DiffusionModel)
        with open(os.path.join(self.run, 'loss_curve.csv')) as stream:
            self.assertEqual(['epoch,step,loss,lr,val_loss'],
                             stream.read().splitlines())
        self.assertFalse(os.path.exists(os.path.join(self.run,
                                                     'checkpoints')))

    def test_train_deterministic(self):
        "loss curves and checkpoints are reproducible"
        self.assertEqual(0, self.gen_data())
        runs = [self.path('run_a'), self.path('run_b')]
        for run in runs:
            self.assertEqual(0, self.cli('train', '--data', self.data,
                                         '--out', run, '--epochs', '2'))
        first, second = snapshot(runs[0]), snapshot(runs[1])
        self.assertEqual(first, second)
        self.assertIn(os.path.join('checkpoints', 'epoch_0001.ddpx'), first)
        self.assertIn(os.path.join('checkpoints', 'epoch_0002.ddpx'), first)
        # two training cases, batches of two: one step per epoch
        lines = first['loss_curve.csv'].decode('utf-8').splitlines()
        self.assertEqual(3, len(lines))

    # -----------------------------------------------------------------
    # whole pipeline
    # -----------------------------------------------------------------

    def test_pipeline(self):
        "gen-data, pretrain, train, sample, eval, plot-dvh"
        self.assertEqual(0, self.gen_data())
        dataset = snapshot(self.data)
        common = ['--data', self.data, '--out', self.run]
        self.assertEqual(0, self.cli('pretrain', *common))
        self.assertTrue(os.path.isfile(os.path.join(self.run,
                                                    'encoder.ddpx')))
        self.assertEqual(0, self.cli('train', *common))
        self.assertEqual(0, self.cli('train', '--baseline', *common))
        baseline, _ = load_checkpoint(os.path.join(self.run,
                                                   'baseline.ddpx'))
        self.assertIsInstance(baseline, BaselineModel)
        self.assertEqual(0, self.cli('sample', *common))
        self.assertEqual(0, self.cli('sample', '--ckpt',
                                     os.path.join(self.run, 'baseline.ddpx'),
                                     *common))
        self.assertEqual(0, self.cli('eval', '--error-maps', '--compare',
                                     os.path.join(self.run,
                                                  'baseline_predictions'),
                                     *common))
        test_ids = read_splits(self.data)['test']
        report = load_report(os.path.join(self.run, 'report.csv'))
        self.assertEqual(CASE_COLUMNS, list(report.cases.columns))
        self.assertEqual(sorted(test_ids), report.case_ids)
        for name in ('summary.csv', 'comparison.csv',
                     os.path.join('error_maps', test_ids[0], 'error.ddtf')):
            self.assertTrue(os.path.isfile(os.path.join(self.run, name)))
        self.assertEqual(0, self.cli('plot-dvh', *common))
        for suffix in ('.csv', '.svg'):
            self.assertTrue(os.path.isfile(
                os.path.join(self.run, 'dvh', test_ids[0] + suffix)))
        # inputs are left alone
        self.assertEqual(dataset, snapshot(self.data))

    def test_sample_per_case(self):
        "a case's prediction does not depend on the other listed cases"
        self.assertEqual(0, self.gen_data())
        common = ['--data', self.data, '--out', self.run]
        self.assertEqual(0, self.cli('train', '--epochs', '0', *common))
        all_dir, one_dir = self.path('all'), self.path('one')
        train_ids = read_splits(self.data)['train']
        self.assertEqual(0, self.cli('sample', '--split', 'train',
                                     '--pred-dir', all_dir, *common))
        self.assertEqual(0, self.cli('sample', '--split', 'train',
                                     '--cases', train_ids[1],
                                     '--pred-dir', one_dir, *common))
        self.assertEqual(0, self.cli('sample', '--split', 'train',
                                     '--pred-dir', self.path('again'),
                                     *common))
        everything = snapshot(all_dir)
        self.assertEqual(everything, snapshot(self.path('again')))
        self.assertEqual(snapshot(one_dir),
                         dict((k, v) for k, v in everything.items()
                              if k.startswith(train_ids[1])))
        self.assertEqual(1, self.cli('sample', '--split', 'train',
                                     '--cases', 'case_9999', *common))

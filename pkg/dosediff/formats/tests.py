# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for dosediff.formats
"""

import json
import os
import shutil
import struct
import tempfile
import unittest

import numpy as np

from .checkpoint_format import (DigestMismatchError, DuplicateNameError,
                                decode_checkpoint, encode_checkpoint,
                                load_checkpoint, save_checkpoint,
                                sidecar_path)
from .config import ConfigError, RunConfig
from .layout import (DatasetError, list_cases, list_predictions, load_split,
                     read_case, read_prediction, read_splits, stack_cases,
                     write_case, write_prediction, write_splits)
from .plot import plot_dvh
from .tensor_format import (BadMagicError, TensorFormatError,
                            TruncatedFileError, VersionMismatchError,
                            decode_tensor, encode_tensor, read_tensor,
                            write_tensor)
from ..internalutil import seeded_rng
from ..metrics.dose import dvh
from ..networks.model import (BaselineModel, DiffusionModel, EncoderModel,
                              build_baseline, build_encoder, build_model)
from ..phantom.generate import generate_case, split_sizes


def tiny_config(**kwargs):
    "a valid configuration with toy networks"
    settings = dict(widths=(4, 4, 8, 8, 8, 8), emb_dim=8, size=32, T=10)
    settings.update(kwargs)
    return RunConfig(**settings)


class TempDirMixin(object):
    "a scratch directory per test"
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def path(self, *parts):
        return os.path.join(self.tmpdir, *parts)


# ---------------------------------------------------------------------
# tensors
# ---------------------------------------------------------------------

class TensorFormatTest(TempDirMixin, unittest.TestCase):
    def test_layout(self):
        "header, dimensions, little-endian floats"
        data = encode_tensor(np.array([[1, 2, 3], [4, 5, 6]]))
        expected = b'DDTF' + struct.pack('<II', 1, 2) +\
            struct.pack('<II', 2, 3) +\
            struct.pack('<6f', 1, 2, 3, 4, 5, 6)
        self.assertEqual(expected, data)

    def test_scalar(self):
        "rank 0 tensors keep their shape"
        data = encode_tensor(np.float32(2.5))
        self.assertEqual(b'DDTF' + struct.pack('<II', 1, 0) +
                         struct.pack('<f', 2.5), data)
        path = self.path('scalar.ddtf')
        write_tensor(path, np.array(-0.75, dtype=np.float32))
        loaded = read_tensor(path)
        self.assertEqual((), loaded.shape)
        self.assertEqual(-0.75, float(loaded))

    def test_round_trip(self):
        "bit-identical values and shapes"
        rng = seeded_rng(0)
        for shape in [(), (5,), (1, 7, 3), (2, 6, 16, 16)]:
            array = rng.standard_normal(shape).astype(np.float32)
            path = self.path('t.ddtf')
            write_tensor(path, array)
            loaded = read_tensor(path)
            self.assertEqual(np.float32, loaded.dtype)
            self.assertEqual(array.shape, loaded.shape)
            self.assertEqual(array.tobytes(), loaded.tobytes())
        special = np.array([np.inf, -0.0, np.nan, 1e-45], dtype=np.float32)
        back, _ = decode_tensor(encode_tensor(special))
        self.assertEqual(special.tobytes(), back.tobytes())

    def test_bad_magic(self):
        "corrupt first byte"
        data = bytearray(encode_tensor(np.ones(3)))
        data[0:1] = b'X'
        self.assertRaises(BadMagicError, decode_tensor, bytes(data))

    def test_version(self):
        "unknown versions are refused"
        data = bytearray(encode_tensor(np.ones(3)))
        data[4:8] = struct.pack('<I', 2)
        self.assertRaises(VersionMismatchError, decode_tensor, bytes(data))

    def test_truncated(self):
        "short headers and payloads"
        data = encode_tensor(np.ones((2, 2)))
        for cut in [2, 10, 14, len(data) - 1]:
            self.assertRaises(TruncatedFileError, decode_tensor, data[:cut])

    def test_trailing_bytes(self):
        "a tensor file holds one tensor"
        path = self.path('t.ddtf')
        with open(path, 'wb') as stream:
            stream.write(encode_tensor(np.ones(2)) + b'\0')
        self.assertRaises(TensorFormatError, read_tensor, path)


# ---------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------

class CheckpointTest(TempDirMixin, unittest.TestCase):
    def test_round_trip(self):
        "every parameter comes back bit-identical"
        config = tiny_config()
        model = build_model(config)
        path = self.path('model.ddpx')
        save_checkpoint(model, path, config)
        self.assertTrue(os.path.isfile(sidecar_path(path)))
        loaded, loaded_config = load_checkpoint(path)
        self.assertIsInstance(loaded, DiffusionModel)
        self.assertEqual(config, loaded_config)
        original = model.state_dict()
        restored = loaded.state_dict()
        self.assertEqual(list(original), list(restored))
        for name, array in original.items():
            self.assertEqual(array.tobytes(), restored[name].tobytes())

    def test_kinds(self):
        "the parameter names tell which model to rebuild"
        config = tiny_config()
        for build, kind in [(build_baseline, BaselineModel),
                            (build_encoder, EncoderModel)]:
            path = self.path('%s.ddpx' % kind.__name__)
            save_checkpoint(build(config), path, config)
            self.assertIsInstance(load_checkpoint(path)[0], kind)
        concat = tiny_config(conditioning='concat')
        path = self.path('concat.ddpx')
        save_checkpoint(build_model(concat), path, concat)
        loaded, _ = load_checkpoint(path)
        self.assertEqual('concat', loaded.conditioning)

    def test_bad_magic(self):
        "a corrupt magic byte is refused before anything is built"
        config = tiny_config()
        path = self.path('model.ddpx')
        save_checkpoint(build_model(config), path, config)
        with open(path, 'rb') as stream:
            data = bytearray(stream.read())
        data[1] ^= 0xFF
        with open(path, 'wb') as stream:
            stream.write(bytes(data))
        self.assertRaises(BadMagicError, load_checkpoint, path)

    def test_truncated(self):
        "missing bytes at the end"
        config = tiny_config()
        path = self.path('model.ddpx')
        save_checkpoint(build_model(config), path, config)
        with open(path, 'rb') as stream:
            data = stream.read()
        with open(path, 'wb') as stream:
            stream.write(data[:-3])
        self.assertRaises(TruncatedFileError, load_checkpoint, path)

    def test_version(self):
        "unknown checkpoint versions are refused"
        data = bytearray(encode_checkpoint([('a', np.ones(2))],
                                           b'\0' * 32))
        data[4:8] = struct.pack('<I', 7)
        self.assertRaises(VersionMismatchError, decode_checkpoint,
                          bytes(data))

    def test_duplicate_names(self):
        "names are unique on the way out and on the way in"
        entries = [('a', np.ones(2)), ('a', np.zeros(2))]
        self.assertRaises(DuplicateNameError, encode_checkpoint, entries,
                          b'\0' * 32)
        data = encode_checkpoint([('a', np.ones(2)), ('b', np.zeros(2))],
                                 b'\0' * 32)
        forged = data.replace(b'\x01\x00b', b'\x01\x00a')
        self.assertRaises(DuplicateNameError, decode_checkpoint, forged)

    def test_entries(self):
        "entries and digest survive encoding"
        digest = bytes(range(32))
        entries = [('encoder.x', np.arange(6.0).reshape(2, 3)),
                   ('predictor.y', np.array([1.5]))]
        found_digest, found = decode_checkpoint(
            encode_checkpoint(entries, digest))
        self.assertEqual(digest, found_digest)
        self.assertEqual(['encoder.x', 'predictor.y'], list(found))
        np.testing.assert_array_equal(entries[0][1], found['encoder.x'])

    def test_digest_mismatch(self):
        "a checkpoint does not load under other widths"
        config = tiny_config()
        path = self.path('model.ddpx')
        save_checkpoint(build_model(config), path, config)
        other = tiny_config(widths=(4, 8, 8, 8, 8, 8))
        self.assertRaises(DigestMismatchError, load_checkpoint, path, other)
        # settings outside the architecture do not matter
        loaded, _ = load_checkpoint(path, config.override(epochs=3))
        self.assertIsInstance(loaded, DiffusionModel)

    def test_missing_sidecar(self):
        "without a configuration there is no model"
        config = tiny_config()
        path = self.path('model.ddpx')
        save_checkpoint(build_model(config), path, config)
        os.remove(sidecar_path(path))
        self.assertRaises(ConfigError, load_checkpoint, path)


# ---------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------

class ConfigTest(TempDirMixin, unittest.TestCase):
    def test_defaults(self):
        "desk scale"
        config = RunConfig()
        self.assertEqual(64, config.size)
        self.assertEqual(200, config.T)
        self.assertEqual([16, 4, 8],
                         split_sizes(config.n_cases, config.split_fractions))
        self.assertEqual((32, 64, 128, 128, 256, 256), config.widths)

    def test_full_scale(self):
        "published settings"
        config = RunConfig.full_scale()
        self.assertEqual((256, 1000, 16, 1500),
                         (config.size, config.T, config.batch_size,
                          config.epochs))
        self.assertEqual((1e-4, 1200, 5e-5),
                         (config.lr, config.lr_drop_epoch, config.lr_dropped))
        self.assertEqual([98, 10, 22],
                         split_sizes(config.n_cases, config.split_fractions))

    def test_round_trip(self):
        "dump then load"
        config = tiny_config(seed=42, data_dir='somewhere')
        path = self.path('config.json')
        config.dump(path)
        self.assertEqual(config, RunConfig.load(path))
        with open(path) as stream:
            self.assertEqual(config.to_json(), json.load(stream))

    def test_partial(self):
        "missing keys take their defaults"
        path = self.path('config.json')
        with open(path, 'w') as stream:
            json.dump({'epochs': 3, 'widths': [8, 8, 8, 8, 8, 8]}, stream)
        config = RunConfig.load(path)
        self.assertEqual(3, config.epochs)
        self.assertEqual((8, 8, 8, 8, 8, 8), config.widths)
        self.assertEqual(RunConfig().T, config.T)

    def test_unknown_keys(self):
        "typos are caught"
        path = self.path('config.json')
        with open(path, 'w') as stream:
            json.dump({'epocs': 3}, stream)
        self.assertRaises(ConfigError, RunConfig.load, path)
        self.assertRaises(ConfigError, RunConfig().override, epocs=3)

    def test_bad_values(self):
        "values are checked"
        for bad in [dict(size=40), dict(T=0), dict(beta_start=1.5),
                    dict(widths=(4, 4, 4)), dict(conditioning='xattn'),
                    dict(split_fractions=(0.5, 0.5, 0.5)),
                    dict(size='64'), dict(epochs=True),
                    dict(hi_divisor='d95')]:
            self.assertRaises(ConfigError, RunConfig, **bad)

    def test_bad_files(self):
        "missing and malformed files"
        self.assertRaises(ConfigError, RunConfig.load, self.path('nope'))
        path = self.path('config.json')
        with open(path, 'w') as stream:
            stream.write('{"size": ')
        self.assertRaises(ConfigError, RunConfig.load, path)
        with open(path, 'w') as stream:
            stream.write('[1, 2]')
        self.assertRaises(ConfigError, RunConfig.load, path)

    def test_override(self):
        "unset flags leave values alone"
        config = RunConfig()
        changed = config.override(epochs=0, seed=None, out_dir='elsewhere')
        self.assertEqual(0, changed.epochs)
        self.assertEqual(config.seed, changed.seed)
        self.assertEqual('elsewhere', changed.out_dir)
        self.assertEqual(300, config.epochs)

    def test_digest(self):
        "architecture settings only"
        config = RunConfig()
        self.assertEqual(32, len(config.architecture_digest()))
        self.assertEqual(config.architecture_digest(),
                         config.override(epochs=1, size=32,
                                         seed=9).architecture_digest())
        self.assertEqual(config.architecture_digest(),
                         config.override(dose_max=2).architecture_digest())
        for change in [dict(widths=(32, 64, 128, 128, 256, 128)),
                       dict(T=100), dict(conditioning='concat'),
                       dict(emb_dim=16)]:
            self.assertNotEqual(config.architecture_digest(),
                                config.override(**change)
                                .architecture_digest())

    def test_require_dir(self):
        "referenced directories must exist"
        config = RunConfig(data_dir=self.tmpdir)
        self.assertEqual(self.tmpdir, config.require_dir('data_dir'))
        missing = config.override(data_dir=self.path('missing'))
        self.assertRaises(ConfigError, missing.require_dir, 'data_dir')


# ---------------------------------------------------------------------
# layout
# ---------------------------------------------------------------------

class LayoutTest(TempDirMixin, unittest.TestCase):
    def test_case_round_trip(self):
        "a case comes back identical"
        case = generate_case(3, 32, 3, case_id='case_0000')
        write_case(self.tmpdir, case)
        self.assertEqual(['case_0000'], list_cases(self.tmpdir))
        loaded = read_case(self.tmpdir, 'case_0000')
        self.assertEqual(case.x.tobytes(), loaded.x.tobytes())
        self.assertEqual(case.y.tobytes(), loaded.y.tobytes())
        self.assertEqual(case.meta(), loaded.meta())
        self.assertRaises(DatasetError, read_case, self.tmpdir, 'case_0001')

    def test_splits(self):
        "splits select and order the cases"
        cases = [generate_case(seed, 32, 2, case_id='case_%04d' % seed)
                 for seed in range(3)]
        for case in cases:
            write_case(self.tmpdir, case)
        self.assertRaises(DatasetError, read_splits, self.tmpdir)
        write_splits(self.tmpdir, {'train': ['case_0002', 'case_0000'],
                                   'val': [], 'test': ['case_0001']})
        train = load_split(self.tmpdir, 'train')
        self.assertEqual(['case_0002', 'case_0000'],
                         [case.case_id for case in train])
        only = load_split(self.tmpdir, 'train', case_ids=['case_0000'])
        self.assertEqual(['case_0000'], [case.case_id for case in only])
        self.assertRaises(DatasetError, load_split, self.tmpdir, 'train',
                          ['case_0001'])
        xs, ys = stack_cases(train)
        self.assertEqual((2, 6, 32, 32), xs.shape)
        self.assertEqual((2, 1, 32, 32), ys.shape)
        self.assertEqual(0, len(stack_cases(load_split(self.tmpdir,
                                                       'val'))[0]))

    def test_predictions(self):
        "one directory per case"
        pred_dir = self.path('predictions')
        dose = np.full((1, 16, 16), 0.5, dtype=np.float32)
        write_prediction(pred_dir, 'case_0001', dose)
        write_prediction(pred_dir, 'case_0000', dose)
        self.assertEqual(['case_0000', 'case_0001'],
                         list_predictions(pred_dir))
        np.testing.assert_array_equal(dose,
                                      read_prediction(pred_dir, 'case_0001'))
        self.assertRaises(DatasetError, read_prediction, pred_dir,
                          'case_0002')
        self.assertRaises(DatasetError, list_predictions, self.path('none'))


# ---------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------

class PlotTest(TempDirMixin, unittest.TestCase):
    def test_svg(self):
        "standalone SVG, reproducible"
        dose = np.linspace(0, 1.2, 100).reshape(10, 10)
        mask = np.zeros((10, 10), dtype=bool)
        mask[2:8, 2:8] = True
        curves = [('pred', dvh(dose, mask, name='ptv')),
                  ('gt', dvh(dose * 0.9, mask, name='ptv'))]
        first, second = self.path('a.svg'), self.path('b.svg')
        plot_dvh(curves, first, title='case_0000')
        plot_dvh(curves, second, title='case_0000')
        with open(first, 'rb') as one, open(second, 'rb') as two:
            content = one.read()
            self.assertEqual(content, two.read())
        self.assertIn(b'<svg', content)
        self.assertTrue(content.startswith(b'<?xml'))

# License: BSD3

"""
Where things live on disk.

A dataset directory holds one sub-directory per case, plus the split
and the configuration it was generated with ::

    DATA/config.json
    DATA/splits.json              {"train": [...], "val": [...], "test": [...]}
    DATA/case_0000/x.ddtf         structure image [6, H, W]
    DATA/case_0000/y.ddtf         dose [1, H, W]
    DATA/case_0000/meta.json      case id, seed, size, beams

A run directory holds what the other commands write ::

    RUN/encoder.ddpx              pretrained structure encoder
    RUN/model.ddpx                trained diffusion model (or baseline.ddpx)
    RUN/checkpoints/epoch_0050.ddpx
    RUN/loss_curve.csv
    RUN/predictions/case_0003/pred.ddtf
    RUN/report.csv                per-case metrics (and summary.csv)
    RUN/dvh/case_0003.svg         DVH plots (and their CSV)
"""

import json
import os

import numpy as np

from ..internalutil import DosediffError
from ..phantom.generate import case_from_json
from ..util import canonical_json
from .tensor_format import read_tensor, write_tensor

CONFIG_FILE = 'config.json'
SPLITS_FILE = 'splits.json'
CASE_X = 'x.ddtf'
CASE_Y = 'y.ddtf'
CASE_META = 'meta.json'
PREDICTION = 'pred.ddtf'
ERROR_MAP = 'error.ddtf'

SPLIT_NAMES = ('train', 'val', 'test')

ENCODER_CHECKPOINT = 'encoder.ddpx'
MODEL_CHECKPOINT = 'model.ddpx'
BASELINE_CHECKPOINT = 'baseline.ddpx'
LOSS_CURVE = 'loss_curve.csv'
PREDICTIONS_DIR = 'predictions'
REPORT_FILE = 'report.csv'
SUMMARY_FILE = 'summary.csv'
COMPARISON_FILE = 'comparison.csv'
ERROR_MAPS_DIR = 'error_maps'
DVH_DIR = 'dvh'


class DatasetError(DosediffError):
    """
    A dataset or prediction directory is missing something
    """
    pass


def mk_parent_dirs(filename):
    """
    Given a filepath that we want to write, create its parent directory as
    needed.
    """
    dirname = os.path.dirname(filename)
    if dirname and not os.path.exists(dirname):
        os.makedirs(dirname)


def _read_json(path):
    if not os.path.isfile(path):
        raise DatasetError("missing file %s" % path)
    with open(path, encoding='utf-8') as stream:
        return json.load(stream)


def _write_json(path, obj):
    mk_parent_dirs(path)
    with open(path, 'w', encoding='utf-8') as stream:
        stream.write(canonical_json(obj))


# ---------------------------------------------------------------------
# cases
# ---------------------------------------------------------------------

def case_dir(root, case_id):
    ":: String -> String -> String"
    return os.path.join(root, case_id)


def write_case(root, case):
    "x, y and metadata of a case in its own directory"
    cdir = case_dir(root, case.case_id)
    if not os.path.isdir(cdir):
        os.makedirs(cdir)
    write_tensor(os.path.join(cdir, CASE_X), case.x)
    write_tensor(os.path.join(cdir, CASE_Y), case.y)
    _write_json(os.path.join(cdir, CASE_META), case.meta())


def read_case(root, case_id):
    """
    Load a case written by `write_case`

    :rtype: PhantomCase
    """
    cdir = case_dir(root, case_id)
    if not os.path.isdir(cdir):
        raise DatasetError("no case %s in %s" % (case_id, root))
    meta = _read_json(os.path.join(cdir, CASE_META))
    x = read_tensor(os.path.join(cdir, CASE_X))
    y = read_tensor(os.path.join(cdir, CASE_Y))
    return case_from_json(meta, x, y)


def list_cases(root):
    "sorted ids of the case directories under a dataset root"
    return sorted(name for name in os.listdir(root)
                  if os.path.isfile(os.path.join(root, name, CASE_META)))


def write_splits(root, splits):
    """
    Parameters
    ----------
    splits : dict(string, [string])
        case ids for each of `SPLIT_NAMES`
    """
    _write_json(os.path.join(root, SPLITS_FILE),
                dict((name, list(splits[name])) for name in SPLIT_NAMES))


def read_splits(root):
    ":: String -> dict(String, [String])"
    splits = _read_json(os.path.join(root, SPLITS_FILE))
    missing = [name for name in SPLIT_NAMES if name not in splits]
    if missing:
        raise DatasetError("%s lacks the %s splits"
                           % (os.path.join(root, SPLITS_FILE),
                              ', '.join(missing)))
    return splits


def load_split(root, name, case_ids=None):
    """
    The cases of one split (optionally restricted to some case ids,
    which must belong to it)

    :rtype: [PhantomCase]
    """
    members = read_splits(root)[name]
    if case_ids:
        strangers = [cid for cid in case_ids if cid not in members]
        if strangers:
            raise DatasetError("not in the %s split: %s"
                               % (name, ', '.join(strangers)))
        members = [cid for cid in members if cid in case_ids]
    return [read_case(root, case_id) for case_id in members]


def stack_cases(cases):
    """
    Structure images and doses of a list of cases as two batches

    :rtype: (float32 array [N, C, H, W], float32 array [N, 1, H, W])
    """
    if not cases:
        return (np.zeros((0, 0, 0, 0), dtype=np.float32),
                np.zeros((0, 1, 0, 0), dtype=np.float32))
    return (np.stack([case.x for case in cases]),
            np.stack([case.y for case in cases]))


def write_config(root, config):
    "the configuration a directory was made with"
    if not os.path.isdir(root):
        os.makedirs(root)
    config.without_paths().dump(os.path.join(root, CONFIG_FILE))


# ---------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------

def periodic_checkpoint_path(out_dir, epoch, stem='epoch'):
    "checkpoint written after (0-based) `epoch`"
    return os.path.join(out_dir, 'checkpoints',
                        '%s_%04d.ddpx' % (stem, epoch + 1))


def prediction_path(pred_dir, case_id, name=PREDICTION):
    ":: String -> String -> String"
    return os.path.join(pred_dir, case_id, name)


def write_prediction(pred_dir, case_id, dose, name=PREDICTION):
    "save one predicted dose map (or error map)"
    path = prediction_path(pred_dir, case_id, name)
    mk_parent_dirs(path)
    write_tensor(path, dose)
    return path


def read_prediction(pred_dir, case_id, name=PREDICTION):
    ":: String -> String -> float32 array"
    path = prediction_path(pred_dir, case_id, name)
    if not os.path.isfile(path):
        raise DatasetError("no prediction for %s in %s" % (case_id, pred_dir))
    return read_tensor(path)


def list_predictions(pred_dir):
    "sorted ids of the cases with a prediction"
    if not os.path.isdir(pred_dir):
        raise DatasetError("no such prediction directory %s" % pred_dir)
    return sorted(name for name in os.listdir(pred_dir)
                  if os.path.isfile(prediction_path(pred_dir, name)))

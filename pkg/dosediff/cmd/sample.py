# License: BSD3

"""
Predict dose maps for the cases of a split

Diffusion checkpoints run the reverse chain from pure noise; baseline
checkpoints regress the dose directly.  Each case is sampled with its
own generator, so predictions do not depend on which other cases are
listed.
"""

import logging
import os

import numpy as np

from ..diffusion.process import DoseScaler, predict_dose
from ..diffusion.schedule import build_schedule
from ..formats.checkpoint_format import load_checkpoint
from ..formats.config import ConfigError
from ..formats.layout import (MODEL_CHECKPOINT, PREDICTIONS_DIR, SPLIT_NAMES,
                              load_split, write_prediction)
from ..internalutil import seeded_rng
from ..learning import progress
from ..networks.model import KIND_BASELINE, KIND_DIFFUSION
from .args import (add_config_args, add_data_args, add_out_args,
                   announce_output_dir, get_output_dir, read_config)

NAME = 'sample'

BASELINE_PREDICTIONS_DIR = 'baseline_predictions'

# stream of the sampling generators, next to the case seed
SAMPLING_STREAM = 3

logger = logging.getLogger(__name__)


def config_argparser(parser):
    """
    Subcommand flags.

    You should create and pass in the subparser to which the flags
    are to be added.
    """
    add_config_args(parser)
    add_data_args(parser)
    add_out_args(parser)
    parser.add_argument('--ckpt', metavar='FILE',
                        help='model to sample from '
                        '(default: OUT/%s)' % MODEL_CHECKPOINT)
    parser.add_argument('--cases', nargs='+', metavar='CASE',
                        help='only these cases of the split')
    parser.add_argument('--split', choices=SPLIT_NAMES, default='test',
                        help='which split to predict (default: %(default)s)')
    parser.add_argument('--pred-dir', metavar='DIR',
                        help='where to write the predictions '
                        '(default: OUT/%s, or OUT/%s for a baseline)'
                        % (PREDICTIONS_DIR, BASELINE_PREDICTIONS_DIR))
    parser.set_defaults(func=main)


def case_rng(seed, case):
    "the generator a case is sampled with"
    return seeded_rng(seed, SAMPLING_STREAM, case.seed)


def predict_case(model, case, config, seed):
    """
    Dose map prediction for one case (float32 array [1, H, W])
    """
    scaler = DoseScaler(config.dose_max)
    x = case.x[np.newaxis]
    if model.kind == KIND_BASELINE:
        estimate = model.predict(x).data
        return scaler.denormalize(estimate)[0].astype(np.float32)
    if model.kind != KIND_DIFFUSION:
        raise ConfigError("cannot sample from a %s checkpoint" % model.kind)
    sched = build_schedule(config.T, config.beta_start, config.beta_end)
    return predict_dose(model, x, sched, scaler, case_rng(seed, case))[0]


def main(args):
    """
    Subcommand main.

    You shouldn't need to call this yourself if you're using
    `config_argparser`
    """
    config = read_config(args, data_dir=args.data, out_dir=args.out)
    data_dir = config.require_dir('data_dir')
    ckpt = args.ckpt or os.path.join(config.out_dir, MODEL_CHECKPOINT)
    # without an explicit configuration, the one saved with the
    # checkpoint decides the architecture and schedule
    model, saved = load_checkpoint(ckpt, config if args.config else None)
    cases = load_split(data_dir, args.split, case_ids=args.cases)
    default_dir = BASELINE_PREDICTIONS_DIR if model.kind == KIND_BASELINE\
        else PREDICTIONS_DIR
    pred_dir = get_output_dir(args.pred_dir or
                              os.path.join(config.out_dir, default_dir))
    for case in progress(cases, 'sampling'):
        dose = predict_case(model, case, saved, config.seed)
        write_prediction(pred_dir, case.case_id, dose)
    logger.info("predicted %d %s cases with the %s model", len(cases),
                args.split, model.kind)
    announce_output_dir(pred_dir)

# License: BSD3

"""
Train the diffusion model (or the L1 baseline) on the training split

Writes periodic checkpoints under OUT/checkpoints, the final model and
the loss curve.  A pretrained structure encoder found in the run
directory is used as the starting point of the encoder.
"""

import logging
import os

from ..diffusion.process import DoseScaler
from ..diffusion.schedule import build_schedule
from ..diffusion.training import train_diffusion
from ..formats.checkpoint_format import load_checkpoint, save_checkpoint
from ..formats.layout import (BASELINE_CHECKPOINT, ENCODER_CHECKPOINT,
                              LOSS_CURVE, MODEL_CHECKPOINT, load_split,
                              periodic_checkpoint_path, stack_cases,
                              write_config)
from ..networks.baseline import train_baseline
from ..networks.model import build_baseline, build_model
from .args import (add_config_args, add_data_args, add_out_args,
                   announce_output_dir, get_output_dir, read_config)

NAME = 'train'

BASELINE_LOSS_CURVE = 'baseline_loss_curve.csv'

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
    parser.add_argument('--epochs', type=int, metavar='INT',
                        help='training epochs')
    parser.add_argument('--ckpt', metavar='FILE',
                        help='where to write the trained model '
                        '(default: OUT/%s or OUT/%s)'
                        % (MODEL_CHECKPOINT, BASELINE_CHECKPOINT))
    parser.add_argument('--encoder', metavar='FILE',
                        help='pretrained structure encoder '
                        '(default: OUT/%s if it exists)' % ENCODER_CHECKPOINT)
    parser.add_argument('--baseline', action='store_true',
                        help='train the L1 regression UNet instead')
    parser.set_defaults(func=main)


def _initial_model(args, config, output_dir):
    """
    Freshly initialised model, with the pretrained encoder swapped in
    when there is one
    """
    if args.baseline:
        return build_baseline(config)
    model = build_model(config)
    if config.conditioning != 'fusion':
        return model
    path = args.encoder or os.path.join(output_dir, ENCODER_CHECKPOINT)
    if os.path.isfile(path):
        pretrained, _ = load_checkpoint(path, config)
        model.encoder = pretrained.encoder
        logger.info("starting from the pretrained encoder %s", path)
    elif args.encoder:
        raise IOError("no such encoder checkpoint %s" % path)
    return model


def main(args):
    """
    Subcommand main.

    You shouldn't need to call this yourself if you're using
    `config_argparser`
    """
    config = read_config(args, data_dir=args.data, out_dir=args.out,
                         epochs=args.epochs)
    data_dir = config.require_dir('data_dir')
    output_dir = get_output_dir(config.out_dir)
    scaler = DoseScaler(config.dose_max)
    xs, ys = stack_cases(load_split(data_dir, 'train'))
    val_xs, val_ys = stack_cases(load_split(data_dir, 'val'))
    val_data = (val_xs, scaler.normalize(val_ys))
    model = _initial_model(args, config, output_dir)
    stem = 'baseline' if args.baseline else 'epoch'

    def on_epoch(epoch, current):
        "periodic checkpoints"
        every = config.checkpoint_every
        if every > 0 and (epoch + 1) % every == 0:
            save_checkpoint(current,
                            periodic_checkpoint_path(output_dir, epoch, stem),
                            config)

    if args.baseline:
        curve = train_baseline(model, xs, scaler.normalize(ys), config,
                               val_data=val_data, on_epoch=on_epoch)
        default_ckpt, curve_name = BASELINE_CHECKPOINT, BASELINE_LOSS_CURVE
    else:
        sched = build_schedule(config.T, config.beta_start, config.beta_end)
        curve = train_diffusion(model, xs, scaler.normalize(ys), sched,
                                config, val_data=val_data, on_epoch=on_epoch)
        default_ckpt, curve_name = MODEL_CHECKPOINT, LOSS_CURVE
    save_checkpoint(model, args.ckpt or os.path.join(output_dir,
                                                     default_ckpt), config)
    curve.dump(os.path.join(output_dir, curve_name))
    write_config(output_dir, config)
    announce_output_dir(output_dir)

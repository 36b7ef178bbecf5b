# License: BSD3

"""
Pretrain the structure encoder on the training split

The encoder learns to regress the dose through a throwaway decoder;
`train` picks it up from the run directory.
"""

import logging
import os

from ..formats.checkpoint_format import save_checkpoint
from ..formats.layout import ENCODER_CHECKPOINT, load_split, write_config
from ..learning import LossCurve
from ..networks.encoder import pretrain_structure_encoder
from ..networks.model import EncoderModel
from .args import (add_config_args, add_data_args, add_out_args,
                   announce_output_dir, get_output_dir, read_config)

NAME = 'pretrain'

PRETRAIN_LOSS_CURVE = 'pretrain_loss_curve.csv'

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
                        help='pretraining epochs')
    parser.add_argument('--ckpt', metavar='FILE',
                        help='where to write the encoder '
                        '(default: OUT/%s)' % ENCODER_CHECKPOINT)
    parser.set_defaults(func=main)


def main(args):
    """
    Subcommand main.

    You shouldn't need to call this yourself if you're using
    `config_argparser`
    """
    config = read_config(args, data_dir=args.data, out_dir=args.out,
                         pretrain_epochs=args.epochs)
    data_dir = config.require_dir('data_dir')
    output_dir = get_output_dir(config.out_dir)
    cases = load_split(data_dir, 'train')
    curve = LossCurve()
    encoder = pretrain_structure_encoder(cases, config, curve=curve)
    ckpt = args.ckpt or os.path.join(output_dir, ENCODER_CHECKPOINT)
    save_checkpoint(EncoderModel(encoder), ckpt, config)
    curve.dump(os.path.join(output_dir, PRETRAIN_LOSS_CURVE))
    write_config(output_dir, config)
    logger.info("encoder pretrained on %d cases", len(cases))
    announce_output_dir(output_dir)

# License: BSD3

"""
Generate a synthetic phantom dataset

Writes one directory per case (structure image, dose, metadata), the
train/val/test split and the configuration used.
"""

import logging

from ..formats.layout import write_case, write_config, write_splits
from ..phantom.generate import generate_dataset, split_dataset
from .args import (add_config_args, add_out_args, announce_output_dir,
                   get_output_dir, read_config)

NAME = 'gen-data'

logger = logging.getLogger(__name__)


def config_argparser(parser):
    """
    Subcommand flags.

    You should create and pass in the subparser to which the flags
    are to be added.
    """
    add_config_args(parser)
    add_out_args(parser, help_text='dataset directory')
    parser.add_argument('--cases', type=int, metavar='INT',
                        help='number of cases')
    parser.add_argument('--size', type=int, metavar='INT',
                        help='image size (a multiple of 16)')
    parser.add_argument('--jobs', type=int, default=1, metavar='INT',
                        help='generate cases in this many processes')
    parser.set_defaults(func=main)


def main(args):
    """
    Subcommand main.

    You shouldn't need to call this yourself if you're using
    `config_argparser`
    """
    config = read_config(args, data_dir=args.out, n_cases=args.cases,
                         size=args.size)
    output_dir = get_output_dir(config.data_dir)
    cases = generate_dataset(config.n_cases, config.seed, size=config.size,
                             n_beams=config.n_beams, jobs=max(args.jobs, 1))
    train, val, test = split_dataset(cases, config.split_fractions,
                                     config.seed)
    for case in cases:
        write_case(output_dir, case)
    write_splits(output_dir,
                 {'train': [case.case_id for case in train],
                  'val': [case.case_id for case in val],
                  'test': [case.case_id for case in test]})
    write_config(output_dir, config)
    logger.info("%d cases (%d train, %d val, %d test)",
                len(cases), len(train), len(val), len(test))
    announce_output_dir(output_dir)

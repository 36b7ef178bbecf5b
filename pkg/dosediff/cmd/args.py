# License: BSD3

"""
Command line options shared by the subcommands
"""

from __future__ import print_function
import os
import sys

from ..formats.config import RunConfig


def add_config_args(parser):
    """
    The run configuration file; its values can be overridden by the
    other flags of each command
    """
    parser.add_argument('--config', metavar='FILE',
                        help='run configuration (JSON); defaults to the '
                        'desk-scale settings')
    parser.add_argument('--seed', type=int, metavar='INT',
                        help='override the configured seed')


def add_data_args(parser):
    "where to read the phantom dataset from"
    parser.add_argument('--data', metavar='DIR',
                        help='dataset directory (written by gen-data)')


def add_out_args(parser, help_text='run directory'):
    "where to write things"
    parser.add_argument('--out', metavar='DIR', help=help_text)


def read_config(args, **overrides):
    """
    Load the configuration named on the command line (or the defaults)
    and apply the flags the user set.

    Keyword arguments map configuration keys to flag values; unset
    flags (`None`) leave the configuration alone.

    :rtype: RunConfig
    """
    if args.config:
        config = RunConfig.load(args.config)
    else:
        config = RunConfig()
    return config.override(seed=args.seed, **overrides)


def get_output_dir(path):
    """
    Create the output directory if need be; refuse plain files
    """
    if os.path.isfile(path):
        raise IOError("%s already exists and is not a directory" % path)
    if not os.path.isdir(path):
        os.makedirs(path)
    return path


def announce_output_dir(output_dir):
    """
    Tell the user where we saved the output
    """
    print("Output files written to", output_dir, file=sys.stderr)

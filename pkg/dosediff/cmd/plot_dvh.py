# License: BSD3

"""
Draw predicted against ground truth DVH curves

One CSV (long format) and one SVG per case, under OUT/dvh.
"""

import os

from ..formats.layout import DVH_DIR, PREDICTIONS_DIR
from ..formats.plot import plot_dvh
from ..metrics.report import write_frame
from .args import (add_config_args, add_data_args, add_out_args,
                   announce_output_dir, get_output_dir, read_config)
from .evaluate import read_inputs

NAME = 'plot-dvh'


def config_argparser(parser):
    """
    Subcommand flags.

    You should create and pass in the subparser to which the flags
    are to be added.
    """
    add_config_args(parser)
    add_data_args(parser)
    add_out_args(parser)
    parser.add_argument('--pred', metavar='DIR',
                        help='predictions to plot '
                        '(default: OUT/%s)' % PREDICTIONS_DIR)
    parser.add_argument('--cases', nargs='+', metavar='CASE',
                        help='only these cases')
    parser.set_defaults(func=main)


def main(args):
    """
    Subcommand main.

    You shouldn't need to call this yourself if you're using
    `config_argparser`
    """
    config = read_config(args, data_dir=args.data, out_dir=args.out)
    pred_dir = args.pred or os.path.join(config.out_dir, PREDICTIONS_DIR)
    report = read_inputs(config, pred_dir, case_ids=args.cases)\
        .report(config)
    output_dir = get_output_dir(os.path.join(config.out_dir, DVH_DIR))
    frame = report.dvh_frame()
    for case_id, curves in report.dvh_curves.items():
        stem = os.path.join(output_dir, case_id)
        write_frame(frame[frame['case_id'] == case_id], stem + '.csv')
        plot_dvh(curves, stem + '.svg', title=case_id)
    announce_output_dir(output_dir)

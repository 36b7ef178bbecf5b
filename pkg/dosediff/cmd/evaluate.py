# License: BSD3

"""
Evaluate predicted dose maps against the ground truth

Writes the per-case report, the aggregate summary and (with
--compare) paired t-tests against a second prediction set, and prints
the summary table.
"""

from __future__ import print_function
from collections import namedtuple
import logging
import os

import numpy as np
from tabulate import tabulate

from ..formats.layout import (COMPARISON_FILE, ERROR_MAP, ERROR_MAPS_DIR,
                              PREDICTIONS_DIR, REPORT_FILE, SUMMARY_FILE,
                              list_predictions, read_case, read_prediction,
                              write_prediction)
from ..metrics.report import (compare_reports, dump_aggregate, dump_report,
                              evaluate, write_frame)
from .args import (add_config_args, add_data_args, add_out_args,
                   announce_output_dir, get_output_dir, read_config)

NAME = 'eval'

logger = logging.getLogger(__name__)


class EvaluationInputs(namedtuple('EvaluationInputs',
                                  'case_ids predictions truths masks '
                                  'regions')):
    """
    Aligned per-case lists of everything `metrics.report.evaluate`
    needs
    """
    def report(self, config, predictions=None):
        """
        Evaluate these predictions (or others for the same cases)

        :rtype: DoseReport
        """
        return evaluate(predictions or self.predictions, self.truths,
                        self.masks, case_ids=self.case_ids,
                        n_bins=config.dvh_bins,
                        hi_divisor=config.hi_divisor,
                        region_masks=self.regions)


def read_inputs(config, pred_dir, case_ids=None):
    """
    Predictions and ground truth for the cases with a prediction in
    `pred_dir` (or just the listed ones)

    :rtype: EvaluationInputs
    """
    data_dir = config.require_dir('data_dir')
    case_ids = case_ids or list_predictions(pred_dir)
    predictions, truths, masks, regions = [], [], [], []
    for case_id in case_ids:
        case = read_case(data_dir, case_id)
        predictions.append(read_prediction(pred_dir, case_id))
        truths.append(case.y)
        masks.append(case.masks())
        regions.append(case.body if config.dose_region == 'body' else None)
    return EvaluationInputs(case_ids, predictions, truths, masks, regions)


def config_argparser(parser):
    """
    Subcommand flags.

    You should create and pass in the subparser to which the flags
    are to be added.
    """
    add_config_args(parser)
    add_data_args(parser)
    add_out_args(parser, help_text='run directory (reports go there)')
    parser.add_argument('--pred', metavar='DIR',
                        help='predictions to evaluate '
                        '(default: OUT/%s)' % PREDICTIONS_DIR)
    parser.add_argument('--compare', metavar='DIR',
                        help='second prediction set to compare against '
                        '(eg. baseline predictions)')
    parser.add_argument('--error-maps', action='store_true',
                        help='also write |prediction - ground truth| maps')
    parser.set_defaults(func=main)


def main(args):
    """
    Subcommand main.

    You shouldn't need to call this yourself if you're using
    `config_argparser`
    """
    config = read_config(args, data_dir=args.data, out_dir=args.out)
    pred_dir = args.pred or os.path.join(config.out_dir, PREDICTIONS_DIR)
    inputs = read_inputs(config, pred_dir)
    output_dir = get_output_dir(config.out_dir)
    report = inputs.report(config)
    dump_report(report, os.path.join(output_dir, REPORT_FILE))
    dump_aggregate(report, os.path.join(output_dir, SUMMARY_FILE))
    print(report.table())
    if args.compare:
        others = [read_prediction(args.compare, case_id)
                  for case_id in inputs.case_ids]
        comparison = compare_reports(report, inputs.report(config, others))
        write_frame(comparison, os.path.join(output_dir, COMPARISON_FILE))
        print()
        print(tabulate(comparison.values.tolist(),
                       headers=list(comparison.columns)))
    if args.error_maps:
        error_dir = os.path.join(output_dir, ERROR_MAPS_DIR)
        for case_id, pred, truth in zip(inputs.case_ids, inputs.predictions,
                                        inputs.truths):
            error = np.abs(pred.astype(np.float64) - truth)
            write_prediction(error_dir, case_id, error, name=ERROR_MAP)
    logger.info("evaluated %d cases from %s", len(inputs.case_ids), pred_dir)
    announce_output_dir(output_dir)

# License: BSD3

"""
Evaluation of predicted dose maps against the ground truth: per-case
metrics and their absolute differences, aggregate mean and spread,
DVH curves, and paired comparisons between two prediction sets.
"""

from collections import OrderedDict
import logging
import math

import numpy as np
import pandas as pd
from tabulate import tabulate

from ..internalutil import check
from .dose import DvhCurve, dvh, summary_metrics
from .spectral import hf_energy_ratio
from .stats import SIGNIFICANCE, paired_t_test

logger = logging.getLogger(__name__)

METRIC_NAMES = ['hi', 'd98', 'd2', 'dmax', 'dmean']

DELTA_COLUMNS = ['delta_' + name for name in METRIC_NAMES]

CASE_COLUMNS = ['case_id'] +\
    ['%s_%s' % (prefix, name)
     for name in METRIC_NAMES
     for prefix in ('pred', 'gt', 'delta')] +\
    ['hf_pred', 'hf_gt']

DVH_COLUMNS = ['case_id', 'structure', 'source', 'dose', 'volume']

COMPARISON_COLUMNS = ['metric', 'mean', 'other_mean', 't', 'p',
                      'significant']

# 9 significant digits for every float we write
FLOAT_FORMAT = '%.9g'
NA_REP = 'NaN'


# ---------------------------------------------------------------------
# formatting
# ---------------------------------------------------------------------

def format_mean_std(mean, std):
    """
    Table style `mean(std)`, eg. ``0.0413(4.5E-3)``
    """
    if std is None or math.isnan(std):
        spread = 'nan'
    else:
        mantissa, exponent = ('%.1E' % std).split('E')
        spread = '%sE%d' % (mantissa, int(exponent))
    return '%.4f(%s)' % (mean, spread)


# ---------------------------------------------------------------------
# report
# ---------------------------------------------------------------------

class DoseReport(object):
    """
    Per-case metric values of a prediction set.

    Attributes
    ----------
    cases : pandas.DataFrame
        one row per case, `CASE_COLUMNS`
    dvh_curves : dict(string, [(string, DvhCurve)])
        per case id, the (source, curve) pairs with source 'pred' or
        'gt'; empty for reports read back from CSV
    comparison : pandas.DataFrame or None
        paired t-tests against another report, see `compare_reports`
    """
    def __init__(self, cases, dvh_curves=None, comparison=None):
        self.cases = cases
        self.dvh_curves = dvh_curves or OrderedDict()
        self.comparison = comparison

    @property
    def case_ids(self):
        return list(self.cases['case_id'])

    def deltas(self):
        ":: DataFrame of the delta columns, indexed by case id"
        return self.cases.set_index('case_id')[DELTA_COLUMNS]

    def aggregate(self):
        """
        Mean and sample standard deviation of each delta over the cases
        (NaN entries skipped)

        :rtype: DataFrame indexed by metric name, columns mean, std
        """
        deltas = self.deltas()
        return pd.DataFrame({'mean': deltas.mean().values,
                             'std': deltas.std(ddof=1).values},
                            index=METRIC_NAMES, columns=['mean', 'std'])

    def table(self):
        "console summary of the aggregates"
        agg = self.aggregate()
        rows = [['delta ' + name, format_mean_std(agg['mean'][name],
                                                  agg['std'][name])]
                for name in METRIC_NAMES]
        rows.append(['hf energy (pred)',
                     '%.4f' % self.cases['hf_pred'].mean()])
        rows.append(['hf energy (gt)',
                     '%.4f' % self.cases['hf_gt'].mean()])
        return tabulate(rows, headers=['metric', 'mean(std)'])

    def dvh_frame(self):
        "all DVH curves in long format (`DVH_COLUMNS`)"
        frames = []
        for case_id, curves in self.dvh_curves.items():
            for source, curve in curves:
                frame = curve.to_frame()
                frame.insert(0, 'case_id', case_id)
                frame.insert(2, 'source', source)
                frames.append(frame)
        if not frames:
            return pd.DataFrame(columns=DVH_COLUMNS)
        return pd.concat(frames, ignore_index=True)[DVH_COLUMNS]


def evaluate_case(case_id, pred, truth, masks, n_bins=100,
                  hi_divisor='d50', region_mask=None):
    """
    Metrics of one prediction against its ground truth.

    Parameters
    ----------
    masks : OrderedDict(string, bool array)
        structure masks by name; must contain 'ptv'
    region_mask : bool array, optional
        where Dmax and Dmean are taken (default: the PTV)

    Returns
    -------
    row : dict
        a `CASE_COLUMNS` row
    curves : [(string, DvhCurve)]
    """
    check('ptv' in masks, "no PTV mask for case %s", case_id)
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    check(pred.size == truth.size,
          "prediction and ground truth differ in shape for case %s: %s, %s",
          case_id, pred.shape, truth.shape)
    pred_summary = summary_metrics(pred, masks['ptv'], hi_divisor=hi_divisor,
                                   region_mask=region_mask)
    gt_summary = summary_metrics(truth, masks['ptv'], hi_divisor=hi_divisor,
                                 region_mask=region_mask)
    row = {'case_id': case_id,
           'hf_pred': hf_energy_ratio(pred),
           'hf_gt': hf_energy_ratio(truth)}
    for name in METRIC_NAMES:
        pred_value = getattr(pred_summary, name)
        gt_value = getattr(gt_summary, name)
        row['pred_' + name] = pred_value
        row['gt_' + name] = gt_value
        row['delta_' + name] = abs(pred_value - gt_value)
    # one grid for both, so that identical maps give identical curves
    max_dose = float(max(pred.max(), truth.max()))
    curves = []
    for name, mask in masks.items():
        curves.append(('pred', dvh(pred, mask, n_bins, max_dose, name)))
        curves.append(('gt', dvh(truth, mask, n_bins, max_dose, name)))
    return row, curves


def evaluate(predictions, truths, masks, case_ids=None, n_bins=100,
             hi_divisor='d50', region_masks=None):
    """
    Evaluate aligned lists of predicted and ground truth dose maps.

    Parameters
    ----------
    predictions, truths : [array]
    masks : [OrderedDict(string, bool array)]
        structure masks of each case, PTV first
    case_ids : [string], optional
    region_masks : [bool array], optional
        per case, where Dmax and Dmean are taken (eg. the body)

    :rtype: DoseReport
    """
    n_cases = len(predictions)
    check(n_cases > 0, "nothing to evaluate")
    check(len(truths) == n_cases and len(masks) == n_cases,
          "misaligned inputs: %d predictions, %d ground truths, %d masks",
          n_cases, len(truths), len(masks))
    if case_ids is None:
        case_ids = ['case_%04d' % i for i in range(n_cases)]
    check(len(case_ids) == n_cases, "%d case ids for %d cases",
          len(case_ids), n_cases)
    check(len(set(case_ids)) == n_cases, "duplicate case ids")
    if region_masks is None:
        region_masks = [None] * n_cases
    rows = []
    curves = OrderedDict()
    for case_id, pred, truth, case_masks, region in \
            zip(case_ids, predictions, truths, masks, region_masks):
        row, case_curves = evaluate_case(case_id, pred, truth, case_masks,
                                         n_bins=n_bins,
                                         hi_divisor=hi_divisor,
                                         region_mask=region)
        rows.append(row)
        curves[case_id] = case_curves
    logger.debug("evaluated %d cases", n_cases)
    return DoseReport(pd.DataFrame(rows, columns=CASE_COLUMNS), curves)


def compare_reports(report, other):
    """
    Paired t-test of every delta metric of `report` against `other`
    over the same cases; `significant` marks p < 0.05

    :rtype: DataFrame (`COMPARISON_COLUMNS`)
    """
    check(sorted(report.case_ids) == sorted(other.case_ids),
          "the reports cover different cases")
    mine = report.deltas()
    theirs = other.deltas().loc[mine.index]
    rows = []
    for name, column in zip(METRIC_NAMES, DELTA_COLUMNS):
        keep = mine[column].notnull() & theirs[column].notnull()
        if keep.sum() < 2:
            logger.warning("not enough defined %s values for a t-test",
                           name)
            t_stat, p_value = float('nan'), float('nan')
        else:
            result = paired_t_test(mine[column][keep], theirs[column][keep])
            t_stat, p_value = result.t, result.p
        rows.append([name, mine[column].mean(), theirs[column].mean(),
                     t_stat, p_value,
                     bool(p_value < SIGNIFICANCE)])
    return pd.DataFrame(rows, columns=COMPARISON_COLUMNS)


# ---------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------

def write_frame(frame, path):
    "CSV with header row and 9 significant digit floats"
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT,
                 na_rep=NA_REP, encoding='utf-8', lineterminator='\n')


def dump_report(report, path):
    "write the per-case rows of a report"
    write_frame(report.cases[CASE_COLUMNS], path)


def load_report(path):
    """
    Read back per-case rows written by `dump_report`

    Raises
    ------
    ContractError
        if columns are missing
    """
    cases = pd.read_csv(path, dtype={'case_id': str}, encoding='utf-8')
    missing = [col for col in CASE_COLUMNS if col not in cases.columns]
    check(not missing, "%s lacks report columns %s", path, missing)
    return DoseReport(cases[CASE_COLUMNS])


def dump_aggregate(report, path):
    "mean, std and table cell of every delta metric"
    agg = report.aggregate()
    agg.insert(0, 'metric', agg.index)
    agg['formatted'] = [format_mean_std(mean, std)
                        for mean, std in zip(agg['mean'], agg['std'])]
    write_frame(agg, path)


def dvh_curves_from_frame(frame):
    """
    Inverse of `DoseReport.dvh_frame`

    :rtype: OrderedDict(string, [(string, DvhCurve)])
    """
    curves = OrderedDict()
    group_keys = ['case_id', 'structure', 'source']
    for (case_id, structure, source), group in \
            frame.groupby(group_keys, sort=False):
        curve = DvhCurve(structure, group['dose'].values,
                         group['volume'].values)
        curves.setdefault(case_id, []).append((source, curve))
    return curves

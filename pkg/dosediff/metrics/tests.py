# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for dosediff.metrics
"""

from collections import OrderedDict
import math
import os
import shutil
import tempfile
import unittest

import numpy as np
from scipy.integrate import quad

from .dose import dose_at_volume, dvh, summary_metrics
from .report import (CASE_COLUMNS, DoseReport, compare_reports,
                     dump_report, dvh_curves_from_frame, evaluate,
                     format_mean_std, load_report)
from .spectral import gaussian_blur, hf_energy_ratio, high_frequency_mask
from .stats import paired_t_test
from ..internalutil import ContractError, seeded_rng


def brute_force_dose_at_volume(values, m):
    """
    largest dose d such that at least m percent of the values are >= d,
    by scanning every distinct value
    """
    n_voxels = len(values)
    best = None
    for level in np.unique(values):
        if np.sum(values >= level) * 100 >= m * n_voxels:
            best = level
    return best


def t_pdf(x, df):
    "density of Student's t distribution"
    log_norm = math.lgamma((df + 1) / 2.0) - math.lgamma(df / 2.0) \
        - 0.5 * math.log(df * math.pi)
    return math.exp(log_norm) * (1 + x * x / df) ** (-(df + 1) / 2.0)


def t_p_by_integration(t_stat, df):
    "two-tailed p-value by numerically integrating the density"
    inner, _ = quad(t_pdf, 0, abs(t_stat), args=(df,),
                    epsabs=1e-12, epsrel=1e-12)
    return 1 - 2 * inner


def square_mask(size, top, left, side):
    mask = np.zeros((size, size), dtype=bool)
    mask[top:top + side, left:left + side] = True
    return mask


def toy_masks(size=16):
    "a PTV in the middle and one organ in a corner"
    return OrderedDict([('ptv', square_mask(size, 5, 5, 6)),
                        ('bladder', square_mask(size, 0, 0, 4))])


# ---------------------------------------------------------------------
# dose at volume, summaries
# ---------------------------------------------------------------------

class DoseAtVolumeTest(unittest.TestCase):
    def test_uniform(self):
        "a uniform dose covers every volume"
        dose = np.full((1, 8, 8), 3.7)
        mask = square_mask(8, 2, 2, 4)
        for m in [0.5, 2, 50, 98, 100]:
            self.assertEqual(3.7, dose_at_volume(dose, mask, m))

    def test_linear(self):
        "98 voxels out of 1..100 receive at least 3"
        dose = np.arange(1, 101, dtype=float)
        mask = np.ones(100, dtype=bool)
        self.assertEqual(3.0, dose_at_volume(dose, mask, 98))
        self.assertEqual(99.0, dose_at_volume(dose, mask, 2))
        self.assertEqual(51.0, dose_at_volume(dose, mask, 50))

    def test_full_coverage_is_minimum(self):
        "D100 is the smallest masked dose"
        rng = seeded_rng(3)
        dose = rng.uniform(0, 2, size=(16, 16))
        mask = rng.uniform(size=(16, 16)) > 0.3
        self.assertEqual(dose[mask].min(), dose_at_volume(dose, mask, 100))

    def test_brute_force(self):
        "agrees with a scan over every distinct dose level"
        rng = seeded_rng(4)
        for n_voxels in [1, 10, 137, 10000]:
            # rounded values, so that ties happen
            dose = np.round(rng.uniform(0, 10, size=n_voxels), 2)
            mask = rng.uniform(size=n_voxels) > 0.4
            mask[0] = True
            values = dose[mask]
            for m in [0.5, 1, 2, 12.5, 50, 95, 98, 99.5, 100]:
                self.assertEqual(brute_force_dose_at_volume(values, m),
                                 dose_at_volume(dose, mask, m))

    def test_monotone(self):
        "larger volumes are covered by lower doses"
        rng = seeded_rng(5)
        dose = rng.uniform(size=(32, 32))
        mask = rng.uniform(size=(32, 32)) > 0.5
        levels = [dose_at_volume(dose, mask, m)
                  for m in np.linspace(1, 100, 40)]
        self.assertTrue(all(a >= b for a, b in zip(levels, levels[1:])))

    def test_contract(self):
        "empty masks and out of range volumes are refused"
        dose = np.ones((4, 4))
        self.assertRaises(ContractError, dose_at_volume, dose,
                          np.zeros((4, 4), dtype=bool), 50)
        self.assertRaises(ContractError, dose_at_volume, dose,
                          np.ones((4, 4), dtype=bool), 0)
        self.assertRaises(ContractError, dose_at_volume, dose,
                          np.ones((4, 4), dtype=bool), 101)
        self.assertRaises(ContractError, dose_at_volume, dose,
                          np.ones((5, 5), dtype=bool), 50)


class SummaryTest(unittest.TestCase):
    def test_uniform(self):
        "perfectly homogeneous dose"
        summary = summary_metrics(np.full((8, 8), 1.25),
                                  square_mask(8, 1, 1, 5))
        for value in [summary.d98, summary.d2, summary.dmax, summary.dmean]:
            self.assertEqual(1.25, value)
        self.assertEqual(0.0, summary.hi)

    def test_linear(self):
        "order statistics of 1..100"
        summary = summary_metrics(np.arange(1, 101, dtype=float),
                                  np.ones(100, dtype=bool))
        self.assertEqual(3.0, summary.d98)
        self.assertEqual(99.0, summary.d2)
        self.assertEqual(100.0, summary.dmax)
        self.assertAlmostEqual(50.5, summary.dmean)
        self.assertAlmostEqual((99.0 - 3.0) / 51.0, summary.hi)

    def test_scaling(self):
        "doses scale, HI does not"
        rng = seeded_rng(6)
        for _ in range(100):
            dose = rng.uniform(0.1, 2.0, size=(16, 16))
            mask = rng.uniform(size=(16, 16)) > 0.5
            mask[8, 8] = True
            base = summary_metrics(dose, mask)
            for scale in [0.5, 2, 10]:
                scaled = summary_metrics(dose * scale, mask)
                self.assertAlmostEqual(base.hi, scaled.hi, delta=1e-6)
                self.assertAlmostEqual(base.d98 * scale, scaled.d98)
                self.assertAlmostEqual(base.dmax * scale, scaled.dmax)
                self.assertAlmostEqual(base.dmean * scale, scaled.dmean)

    def test_undefined_hi(self):
        "zero median dose gives a flagged missing HI"
        dose = np.zeros(10)
        dose[9] = 1.0
        with self.assertLogs('dosediff.metrics.dose', 'WARNING'):
            summary = summary_metrics(dose, np.ones(10, dtype=bool))
        self.assertTrue(math.isnan(summary.hi))

    def test_prescription_divisor(self):
        "HI can be taken relative to the prescription"
        dose = np.arange(1, 101, dtype=float)
        mask = np.ones(100, dtype=bool)
        summary = summary_metrics(dose, mask, hi_divisor='prescription',
                                  prescription=50.0)
        self.assertAlmostEqual(96.0 / 50.0, summary.hi)
        self.assertRaises(ContractError, summary_metrics, dose, mask,
                          hi_divisor='d95')

    def test_region(self):
        "Dmax and Dmean over another region"
        dose = np.zeros((8, 8))
        dose[0, 0] = 5.0
        ptv = square_mask(8, 3, 3, 2)
        dose[ptv] = 1.0
        body = np.ones((8, 8), dtype=bool)
        on_ptv = summary_metrics(dose, ptv)
        on_body = summary_metrics(dose, ptv, region_mask=body)
        self.assertEqual(1.0, on_ptv.dmax)
        self.assertEqual(5.0, on_body.dmax)
        self.assertAlmostEqual(9.0 / 64, on_body.dmean)
        self.assertEqual(on_ptv.d98, on_body.d98)


# ---------------------------------------------------------------------
# DVH
# ---------------------------------------------------------------------

class DvhTest(unittest.TestCase):
    def test_step(self):
        "uniform dose gives a step at its level"
        curve = dvh(np.full((4, 4), 1.5), np.ones((4, 4), dtype=bool),
                    n_bins=5, max_dose=3.0, name='ptv')
        np.testing.assert_array_equal([0, 0.75, 1.5, 2.25, 3], curve.dose)
        np.testing.assert_array_equal([1, 1, 1, 0, 0], curve.volume)
        self.assertEqual('ptv', curve.name)

    def test_linear(self):
        "51 of the voxels 1..100 receive at least 50"
        curve = dvh(np.arange(1, 101, dtype=float), np.ones(100, dtype=bool),
                    n_bins=101)
        self.assertEqual(50.0, curve.dose[50])
        self.assertAlmostEqual(0.51, curve.volume[50])

    def test_invariants(self):
        "curves start at 1 and never increase"
        rng = seeded_rng(7)
        for _ in range(100):
            dose = rng.uniform(0, 2, size=(12, 12))
            mask = rng.uniform(size=(12, 12)) > 0.6
            mask[0, 0] = True
            curve = dvh(dose, mask, n_bins=50)
            self.assertEqual(1.0, curve.volume[0])
            self.assertTrue(np.all(np.diff(curve.volume) <= 0))
            self.assertTrue(np.all(np.diff(curve.dose) > 0))
            self.assertEqual(dose.max(), curve.dose[-1])

    def test_brute_force(self):
        "each level matches a direct count"
        rng = seeded_rng(8)
        dose = np.round(rng.uniform(0, 3, size=500), 1)
        mask = rng.uniform(size=500) > 0.5
        curve = dvh(dose, mask, n_bins=31, max_dose=3.0)
        values = dose[mask]
        for level, volume in zip(curve.dose, curve.volume):
            self.assertAlmostEqual(np.mean(values >= level), volume)

    def test_negative_doses(self):
        "negative doses count as no dose"
        dose = np.array([-0.5, -0.1, 0.5, 1.0])
        curve = dvh(dose, np.ones(4, dtype=bool), n_bins=3)
        np.testing.assert_array_equal([0, 0.5, 1.0], curve.dose)
        np.testing.assert_array_equal([1, 0.5, 0.25], curve.volume)
        flat = dvh(-np.ones(4), np.ones(4, dtype=bool), n_bins=3)
        np.testing.assert_array_equal([0, 0, 0], flat.dose)
        np.testing.assert_array_equal([1, 1, 1], flat.volume)

    def test_contract(self):
        "empty masks and single bins are refused"
        self.assertRaises(ContractError, dvh, np.ones(4),
                          np.zeros(4, dtype=bool))
        self.assertRaises(ContractError, dvh, np.ones(4),
                          np.ones(4, dtype=bool), n_bins=1)


# ---------------------------------------------------------------------
# t-test
# ---------------------------------------------------------------------

class PairedTTestTest(unittest.TestCase):
    def test_identical(self):
        "identical samples"
        result = paired_t_test([1.0, 2.5, 3.0], [1.0, 2.5, 3.0])
        self.assertEqual((0.0, 1.0), (result.t, result.p))
        self.assertTrue(result.degenerate)

    def test_known(self):
        "differences 1..5"
        b = np.array([0.3, 1.1, -2.0, 0.0, 4.2])
        a = b + np.arange(1, 6)
        result = paired_t_test(a, b)
        self.assertAlmostEqual(4.2426, result.t, places=4)
        self.assertAlmostEqual(0.0132, result.p, places=3)
        self.assertAlmostEqual(t_p_by_integration(result.t, 4), result.p,
                               delta=1e-4)
        self.assertEqual(5, result.n)
        self.assertFalse(result.degenerate)

    def test_integration_oracle(self):
        "p-values agree with numerical integration of the density"
        rng = seeded_rng(9)
        for n_pairs in range(2, 31):
            a = rng.normal(size=n_pairs)
            b = a + rng.normal(loc=0.3, size=n_pairs)
            result = paired_t_test(a, b)
            self.assertAlmostEqual(
                t_p_by_integration(result.t, n_pairs - 1), result.p,
                delta=1e-4)

    def test_symmetry(self):
        "swapping the samples negates t"
        rng = seeded_rng(10)
        a, b = rng.normal(size=12), rng.normal(size=12)
        one, two = paired_t_test(a, b), paired_t_test(b, a)
        self.assertAlmostEqual(one.t, -two.t)
        self.assertAlmostEqual(one.p, two.p)

    def test_constant_differences(self):
        "zero variance with a nonzero mean"
        result = paired_t_test([3.0, 4.0, 5.0], [1.0, 2.0, 3.0])
        self.assertEqual(float('inf'), result.t)
        self.assertEqual(0.0, result.p)
        result = paired_t_test([1.0, 2.0, 3.0], [3.0, 4.0, 5.0])
        self.assertEqual(float('-inf'), result.t)

    def test_contract(self):
        "a single pair or mismatched lengths are refused"
        self.assertRaises(ContractError, paired_t_test, [1.0], [2.0])
        self.assertRaises(ContractError, paired_t_test, [1.0, 2.0], [2.0])


# ---------------------------------------------------------------------
# spectral
# ---------------------------------------------------------------------

class HighFrequencyTest(unittest.TestCase):
    def test_band_is_a_disk(self):
        "diagonal bins past the radius are high even below it on each axis"
        mask = high_frequency_mask((16, 16))
        self.assertTrue(mask[3, 3])
        self.assertTrue(mask[4, 0])
        self.assertTrue(mask[0, 12])
        self.assertFalse(mask[3, 0])
        self.assertFalse(mask[13, 2])
        self.assertFalse(mask[0, 0])

    def test_constant(self):
        "no energy besides DC"
        self.assertEqual(0.0, hf_energy_ratio(np.full((1, 16, 16), 0.7)))
        self.assertEqual(0.0, hf_energy_ratio(np.zeros((8, 8))))

    def test_impulse(self):
        "flat spectrum: ratio of bins outside the central band"
        for shape in [(16, 16), (8, 12)]:
            image = np.zeros(shape)
            image[3, 5] = 1.0
            outside = 0
            for k in range(shape[0]):
                for l in range(shape[1]):
                    if (k, l) == (0, 0):
                        continue
                    freq_k = (k if k <= (shape[0] - 1) // 2
                              else k - shape[0]) / float(shape[0])
                    freq_l = (l if l <= (shape[1] - 1) // 2
                              else l - shape[1]) / float(shape[1])
                    if math.hypot(freq_k, freq_l) >= 0.25:
                        outside += 1
            expected = outside / float(shape[0] * shape[1] - 1)
            self.assertAlmostEqual(expected, hf_energy_ratio(image))

    def test_blur_lowers_ratio(self):
        "Gaussian blur removes high frequencies"
        rng = seeded_rng(11)
        for _ in range(10):
            image = rng.uniform(size=(1, 32, 32))
            ratio = hf_energy_ratio(image)
            self.assertTrue(0 < ratio < 1)
            for sigma in [1.0, 2.0]:
                blurred = gaussian_blur(image, sigma)
                self.assertEqual(image.shape, blurred.shape)
                self.assertLess(hf_energy_ratio(blurred), ratio)

    def test_contract(self):
        "maps smaller than 4 pixels or with channels are refused"
        self.assertRaises(ContractError, hf_energy_ratio, np.ones((3, 8)))
        self.assertRaises(ContractError, hf_energy_ratio,
                          np.ones((2, 8, 8)))


# ---------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------

def toy_doses(rng, n_cases, size=16, noise=0.05):
    "ground truths and noisy predictions"
    truths = [rng.uniform(0.5, 1.5, size=(1, size, size))
              for _ in range(n_cases)]
    preds = [truth + rng.normal(scale=noise, size=truth.shape)
             for truth in truths]
    return preds, truths


class ReportTest(unittest.TestCase):
    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def test_format(self):
        "mean with its spread in parentheses"
        self.assertEqual('0.0413(4.5E-3)', format_mean_std(0.0413, 0.0045))
        self.assertEqual('1.5000(2.5E-1)', format_mean_std(1.5, 0.25))
        self.assertEqual('0.1000(nan)', format_mean_std(0.1, float('nan')))

    def test_perfect_prediction(self):
        "no differences, identical DVH curves"
        _, truths = toy_doses(seeded_rng(12), 3)
        masks = [toy_masks()] * 3
        report = evaluate(truths, truths, masks)
        self.assertTrue(np.all(report.deltas().values == 0))
        for curves in report.dvh_curves.values():
            self.assertEqual(4, len(curves))
            for (_, pred), (_, truth) in zip(curves[::2], curves[1::2]):
                np.testing.assert_array_equal(pred.volume, truth.volume)
                np.testing.assert_array_equal(pred.dose, truth.dose)

    def test_aggregate(self):
        "aggregates are the mean and sample deviation of the rows"
        preds, truths = toy_doses(seeded_rng(13), 6)
        report = evaluate(preds, truths, [toy_masks()] * 6,
                          case_ids=['c%d' % i for i in range(6)])
        agg = report.aggregate()
        for name in ['hi', 'd98', 'd2', 'dmax', 'dmean']:
            column = report.cases['delta_' + name].values
            self.assertTrue(np.all(column >= 0))
            self.assertAlmostEqual(column.mean(), agg['mean'][name])
            self.assertAlmostEqual(column.std(ddof=1), agg['std'][name])
            np.testing.assert_allclose(
                np.abs(report.cases['pred_' + name] -
                       report.cases['gt_' + name]), column)
        self.assertIn('delta dmean', report.table())

    def test_csv(self):
        "per-case rows survive the CSV at 9 significant digits"
        preds, truths = toy_doses(seeded_rng(14), 4)
        report = evaluate(preds, truths, [toy_masks()] * 4)
        first = os.path.join(self.tmpdir, 'first.csv')
        second = os.path.join(self.tmpdir, 'second.csv')
        dump_report(report, first)
        loaded = load_report(first)
        self.assertEqual(CASE_COLUMNS, list(loaded.cases.columns))
        self.assertEqual(report.case_ids, loaded.case_ids)
        for column in CASE_COLUMNS[1:]:
            np.testing.assert_allclose(report.cases[column],
                                       loaded.cases[column], rtol=1e-8)
        dump_report(loaded, second)
        with open(first, 'rb') as one, open(second, 'rb') as two:
            self.assertEqual(one.read(), two.read())

    def test_missing_hi_in_csv(self):
        "undefined values are written and read back as NaN"
        truth = np.zeros((1, 16, 16))
        masks = toy_masks()
        truth[0][masks['ptv']] = 0.0
        truth[0, 0, 0] = 1.0
        report = evaluate([truth + 0.0], [truth], [masks])
        self.assertTrue(math.isnan(report.cases['gt_hi'][0]))
        path = os.path.join(self.tmpdir, 'nan.csv')
        dump_report(report, path)
        self.assertTrue(math.isnan(load_report(path).cases['gt_hi'][0]))

    def test_dvh_frame(self):
        "long format DVH table and back"
        preds, truths = toy_doses(seeded_rng(15), 2)
        report = evaluate(preds, truths, [toy_masks()] * 2, n_bins=10)
        frame = report.dvh_frame()
        self.assertEqual(2 * 2 * 2 * 10, len(frame))
        curves = dvh_curves_from_frame(frame)
        self.assertEqual(list(report.dvh_curves), list(curves))
        for case_id, case_curves in report.dvh_curves.items():
            for (source, curve), (source2, curve2) in \
                    zip(case_curves, curves[case_id]):
                self.assertEqual(source, source2)
                self.assertEqual(curve.name, curve2.name)
                np.testing.assert_array_equal(curve.volume, curve2.volume)

    def test_misaligned(self):
        "lists of different lengths are refused"
        preds, truths = toy_doses(seeded_rng(16), 3)
        self.assertRaises(ContractError, evaluate, preds, truths[:2],
                          [toy_masks()] * 3)
        self.assertRaises(ContractError, evaluate, preds, truths,
                          [toy_masks()] * 3, case_ids=['a', 'a', 'b'])


class CompareTest(unittest.TestCase):
    def test_compare(self):
        "paired tests of the deltas of two prediction sets"
        rng = seeded_rng(17)
        good, truths = toy_doses(rng, 8, noise=0.01)
        bad = [truth * 1.2 for truth in truths]
        masks = [toy_masks()] * 8
        mine = evaluate(good, truths, masks)
        theirs = evaluate(bad, truths, masks)
        comparison = compare_reports(mine, theirs)
        self.assertEqual(['hi', 'd98', 'd2', 'dmax', 'dmean'],
                         list(comparison['metric']))
        row = comparison.set_index('metric').loc['dmean']
        direct = paired_t_test(mine.cases['delta_dmean'],
                               theirs.cases['delta_dmean'])
        self.assertAlmostEqual(direct.t, row['t'])
        self.assertAlmostEqual(direct.p, row['p'])
        self.assertTrue(row['significant'])
        self.assertLess(row['mean'], row['other_mean'])

    def test_different_cases(self):
        "reports over different cases cannot be compared"
        preds, truths = toy_doses(seeded_rng(18), 3)
        masks = [toy_masks()] * 3
        one = evaluate(preds, truths, masks, case_ids=['a', 'b', 'c'])
        two = evaluate(preds, truths, masks, case_ids=['a', 'b', 'd'])
        self.assertRaises(ContractError, compare_reports, one, two)
        self.assertIsInstance(one, DoseReport)

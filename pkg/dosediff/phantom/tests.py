# -*- coding: utf-8 -*-
#
# License: BSD3
# pylint: disable=too-many-public-methods, invalid-name

"""
Tests for dosediff.phantom
"""

import unittest

import numpy as np

from .beams import BeamSpec, analytic_dose, default_beams, tissue_depth
from .generate import (PhantomCase, case_from_json, generate_case,
                       generate_dataset, split_dataset, split_sizes)
from .geometry import Ellipse, OAR_NAMES, sample_anatomy
from ..internalutil import ContractError, seeded_rng
from ..metrics.spectral import gaussian_blur, hf_energy_ratio


def check_case_invariants(test, case):
    "disjoint masks inside the body, normalised PTV dose"
    test.assertEqual((6, case.size, case.size), case.x.shape)
    test.assertEqual((1, case.size, case.size), case.y.shape)
    test.assertEqual(np.float32, case.x.dtype)
    test.assertEqual(np.float32, case.y.dtype)
    test.assertTrue(np.all((case.x[0] >= 0) & (case.x[0] <= 1)))
    masks = case.x[1:]
    test.assertTrue(np.all((masks == 0) | (masks == 1)))
    test.assertTrue(case.ptv.any())
    test.assertTrue(np.all(masks.sum(axis=0) <= 1))
    test.assertFalse(np.any(masks.astype(bool) & ~case.body))
    ptv_dose = case.y[0][case.ptv].astype(np.float64)
    test.assertAlmostEqual(1.0, ptv_dose.mean(), delta=1e-6)
    test.assertTrue(np.all(case.y >= 0))
    test.assertTrue(np.all(case.y[0][~case.body] == 0))


def ptv_square(size, top, side):
    ptv = np.zeros((size, size), dtype=bool)
    ptv[top:top + side, top:top + side] = True
    return ptv


# ---------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------

class GeometryTest(unittest.TestCase):
    def test_ellipse_mask(self):
        "axis aligned ellipse"
        mask = Ellipse(cy=5, cx=5, ry=2, rx=4, angle=0).mask(11)
        self.assertTrue(mask[5, 1] and mask[5, 9] and mask[3, 5])
        self.assertFalse(mask[5, 0] or mask[2, 5] or mask[3, 8])
        turned = Ellipse(cy=5, cx=5, ry=2, rx=4, angle=np.pi / 2).mask(11)
        np.testing.assert_array_equal(mask.T, turned)

    def test_anatomy(self):
        "all structures placed, disjoint, inside the body"
        rng = seeded_rng(0)
        for size in [32, 64]:
            anatomy = sample_anatomy(rng, size)
            self.assertEqual(len(OAR_NAMES), len(anatomy.oars))
            taken = anatomy.ptv.astype(int)
            for oar in anatomy.oars:
                self.assertTrue(oar.any())
                taken += oar
            self.assertTrue(np.all(taken <= 1))
            self.assertFalse(np.any((taken > 0) & ~anatomy.body))
            self.assertTrue(np.all(anatomy.ct[anatomy.body] >= 0.05))
            self.assertTrue(np.all(anatomy.ct[~anatomy.body] == 0))

    def test_too_small(self):
        "phantoms need some room"
        self.assertRaises(ContractError, sample_anatomy, seeded_rng(0), 8)


# ---------------------------------------------------------------------
# beams
# ---------------------------------------------------------------------

class BeamTest(unittest.TestCase):
    def test_spec_contract(self):
        "widths and weights are positive, attenuation non-negative"
        self.assertRaises(ContractError, BeamSpec, 0.0, 0.0, 0.1, 1.0)
        self.assertRaises(ContractError, BeamSpec, 0.0, 4.0, -0.1, 1.0)
        self.assertRaises(ContractError, BeamSpec, 0.0, 4.0, 0.1, 0.0)
        beam = BeamSpec(1, 4, 0, 2)
        self.assertEqual(beam, BeamSpec(**beam.to_json()))

    def test_single_unattenuated_beam(self):
        "constant dose inside the band, nothing outside"
        size = 32
        body = np.ones((size, size), dtype=bool)
        ptv = ptv_square(size, 14, 4)
        beam = BeamSpec(angle=0.0, width=8.0, attenuation_mu=0.0,
                        weight=1.5)
        dose = analytic_dose(body, ptv, [beam], normalize=False)[0]
        np.testing.assert_array_equal(np.full((8, size), 1.5),
                                      dose[12:20])
        self.assertTrue(np.all(dose[:12] == 0))
        self.assertTrue(np.all(dose[20:] == 0))

    def test_superposition(self):
        "crossing beams add up"
        size = 32
        body = np.ones((size, size), dtype=bool)
        ptv = ptv_square(size, 14, 4)
        across = BeamSpec(0.0, 8.0, 0.0, 1.0)
        down = BeamSpec(np.pi / 2, 8.0, 0.0, 1.0)
        single = analytic_dose(body, ptv, [across], normalize=False)[0]
        both = analytic_dose(body, ptv, [across, down], normalize=False)[0]
        np.testing.assert_array_equal(np.full((8, 8), 2.0),
                                      both[12:20, 12:20])
        self.assertEqual(2.0 * single[15, 15], both[15, 15])
        self.assertEqual(1.0, both[15, 0])
        self.assertEqual(1.0, both[0, 15])
        self.assertEqual(0.0, both[0, 0])

    def test_attenuation(self):
        "dose falls off with depth along the beam"
        size = 32
        body = np.zeros((size, size), dtype=bool)
        body[4:28, 4:28] = True
        depth = tissue_depth(body, (0.0, 1.0))
        np.testing.assert_array_equal(np.arange(1, 25), depth[10, 4:28])
        self.assertTrue(np.all(depth[:, :4] == 0))
        ptv = ptv_square(size, 14, 4)
        dose = analytic_dose(body, ptv, [BeamSpec(0.0, 6.0, 0.1, 1.0)],
                             normalize=False)[0]
        row = dose[15, 4:28]
        np.testing.assert_allclose(np.exp(-0.1 * np.arange(1, 25)), row,
                                   rtol=1e-6)
        self.assertEqual(0.0, dose[15, 2])

    def test_normalization(self):
        "PTV mean is the prescription"
        rng = seeded_rng(1)
        anatomy = sample_anatomy(rng, 32)
        beams = default_beams(rng, 5, 32)
        dose = analytic_dose(anatomy.body, anatomy.ptv, beams)
        self.assertEqual((1, 32, 32), dose.shape)
        self.assertAlmostEqual(1.0, dose[0][anatomy.ptv].mean(), delta=1e-6)

    def test_contract(self):
        "no beams, or no target"
        body = np.ones((16, 16), dtype=bool)
        beam = BeamSpec(0.0, 4.0, 0.0, 1.0)
        self.assertRaises(ContractError, analytic_dose, body,
                          ptv_square(16, 6, 4), [])
        self.assertRaises(ContractError, analytic_dose, body,
                          np.zeros((16, 16), dtype=bool), [beam])

    def test_default_beams(self):
        "equally spaced fan with bounded parameters"
        beams = default_beams(seeded_rng(2), 9, 64)
        self.assertEqual(9, len(beams))
        for beam in beams:
            self.assertTrue(0 <= beam.angle < 2 * np.pi)
            self.assertTrue(0.15 * 64 <= beam.width <= 0.25 * 64)
            self.assertTrue(0.8 <= beam.weight <= 1.2)


# ---------------------------------------------------------------------
# cases
# ---------------------------------------------------------------------

class GenerateTest(unittest.TestCase):
    def test_invariant_sweep(self):
        "generated cases satisfy the case invariants"
        for seed in range(40):
            check_case_invariants(self, generate_case(seed, 64, 9))
        for seed in range(10):
            check_case_invariants(self, generate_case(seed, 32, 3))

    def test_determinism(self):
        "same arguments, same case"
        one = generate_case(1234, 64, 9)
        two = generate_case(1234, 64, 9)
        self.assertEqual(one.x.tobytes(), two.x.tobytes())
        self.assertEqual(one.y.tobytes(), two.y.tobytes())
        self.assertEqual(one.beams, two.beams)
        self.assertEqual(one.meta(), two.meta())

    def test_seed_sensitivity(self):
        "different seeds move the target"
        centres = []
        for seed in [1, 2]:
            rows, cols = np.nonzero(generate_case(seed).ptv)
            centres.append((rows.mean(), cols.mean()))
        self.assertNotEqual(centres[0], centres[1])

    def test_sharp_edges(self):
        "dose maps carry more high frequency energy than their blur"
        for seed in range(10):
            dose = generate_case(seed, 64, 9).y
            self.assertGreater(hf_energy_ratio(dose),
                               hf_energy_ratio(gaussian_blur(dose, 2.0)))

    def test_contract(self):
        "sizes must divide by 16, at least one beam"
        self.assertRaises(ContractError, generate_case, 0, 40, 9)
        self.assertRaises(ContractError, generate_case, 0, 64, 0)

    def test_meta(self):
        "metadata and arrays rebuild the case"
        case = generate_case(5, 32, 3, case_id='case_0005')
        meta = case.meta()
        self.assertEqual('case_0005', meta['case_id'])
        self.assertEqual(32, meta['size'])
        self.assertEqual(3, len(meta['beams']))
        rebuilt = case_from_json(meta, case.x, case.y)
        self.assertIsInstance(rebuilt, PhantomCase)
        self.assertEqual(case.beams, rebuilt.beams)
        self.assertEqual(case.seed, rebuilt.seed)
        self.assertEqual(['ptv'] + OAR_NAMES, list(case.masks()))

    def test_dataset(self):
        "named cases, independent of the number of workers"
        cases = generate_dataset(3, 7, size=32, n_beams=3)
        self.assertEqual(['case_0000', 'case_0001', 'case_0002'],
                         [case.case_id for case in cases])
        self.assertEqual(3, len(set(case.seed for case in cases)))
        parallel = generate_dataset(3, 7, size=32, n_beams=3, jobs=2)
        for one, two in zip(cases, parallel):
            self.assertEqual(one.y.tobytes(), two.y.tobytes())
            self.assertEqual(one.x.tobytes(), two.x.tobytes())


# ---------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------

class SplitTest(unittest.TestCase):
    def test_published_sizes(self):
        "130 cases into 98, 10 and 22"
        self.assertEqual([98, 10, 22],
                         split_sizes(130, (0.754, 0.077, 0.169)))
        self.assertEqual([16, 4, 8],
                         split_sizes(28, (16 / 28.0, 4 / 28.0, 8 / 28.0)))

    def test_partition(self):
        "disjoint, exhaustive, reproducible"
        items = list(range(28))
        train, val, test = split_dataset(items, (0.6, 0.15, 0.25), 3)
        self.assertEqual(sorted(items), sorted(train + val + test))
        self.assertEqual([17, 4, 7], [len(train), len(val), len(test)])
        self.assertEqual((train, val, test),
                         split_dataset(items, (0.6, 0.15, 0.25), 3))
        self.assertNotEqual(train,
                            split_dataset(items, (0.6, 0.15, 0.25), 4)[0])

    def test_all_train(self):
        "zero fractions give empty splits"
        train, val, test = split_dataset(list(range(5)), (1, 0, 0), 0)
        self.assertEqual(5, len(train))
        self.assertEqual(([], []), (val, test))

    def test_contract(self):
        "fractions must sum to one and leave no split empty"
        self.assertRaises(ContractError, split_sizes, 10, (0.5, 0.5, 0.5))
        self.assertRaises(ContractError, split_sizes, 2, (0.6, 0.2, 0.2))
        self.assertRaises(ContractError, split_sizes, 10, (0.5, 0.5))

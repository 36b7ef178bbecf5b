# License: BSD3

"""
Synthetic cases: structure images with their analytic dose, and the
train/validation/test split of a set of cases.
"""

from collections import OrderedDict, namedtuple
from concurrent.futures import ProcessPoolExecutor
import logging

import numpy as np

from ..internalutil import check, seeded_rng
from .beams import BeamSpec, analytic_dose, default_beams
from .geometry import OAR_NAMES, sample_anatomy

logger = logging.getLogger(__name__)

N_OARS = len(OAR_NAMES)
CHANNEL_NAMES = ['ct', 'ptv'] + OAR_NAMES


class PhantomCase(namedtuple('PhantomCase', 'case_id x y seed beams')):
    """
    One example.

    Attributes
    ----------
    case_id : string
    x : float32 array [2 + 4, H, W]
        CT intensity in [0, 1], PTV mask, then the OAR masks in
        `OAR_NAMES` order
    y : float32 array [1, H, W]
        dose relative to the prescription (PTV mean 1)
    seed : int
        64 bit seed the case was generated from
    beams : list of BeamSpec
    """
    @property
    def size(self):
        return self.x.shape[-1]

    @property
    def ptv(self):
        ":: bool array [H, W]"
        return self.x[1] > 0.5

    @property
    def body(self):
        ":: bool array [H, W]"
        return self.x[0] > 0

    def oar(self, index):
        ":: Int -> bool array [H, W]"
        return self.x[2 + index] > 0.5

    def masks(self):
        ":: OrderedDict String (bool array [H, W]), PTV first"
        return structure_masks(self.x)

    def meta(self):
        "the JSON description of a case"
        return {'case_id': self.case_id,
                'seed': int(self.seed),
                'size': int(self.size),
                'beams': [beam.to_json() for beam in self.beams]}


def structure_masks(x):
    """
    The PTV and OAR masks of a structure image, by name, PTV first
    """
    x = np.asarray(x)
    masks = OrderedDict([('ptv', x[1] > 0.5)])
    for index, name in enumerate(OAR_NAMES):
        masks[name] = x[2 + index] > 0.5
    return masks


def case_seed(seed, index):
    """
    64 bit seed of the `index`-th case of a dataset generated with
    `seed`
    """
    state = np.random.SeedSequence([seed, index]).generate_state(
        1, dtype=np.uint64)
    return int(state[0])


def case_name(index):
    ":: Int -> String"
    return 'case_%04d' % index


def generate_case(seed, size=64, n_beams=9, case_id=None):
    """
    A case drawn from its seed alone.

    Raises
    ------
    ContractError
        if the size is not a multiple of 16 or there are no beams
    PhantomGenerationError
        if the anatomy could not be placed
    """
    check(size % 16 == 0 and size > 0,
          "image size must be a positive multiple of 16, got %s", size)
    check(n_beams >= 1, "at least one beam needed, got %s", n_beams)
    rng = seeded_rng(seed)
    anatomy = sample_anatomy(rng, size)
    beams = default_beams(rng, n_beams, size)
    dose = analytic_dose(anatomy.body, anatomy.ptv, beams)
    x = np.stack([anatomy.ct, anatomy.ptv] + anatomy.oars)\
        .astype(np.float32)
    return PhantomCase(case_id or 'seed_%d' % seed, x, dose, seed, beams)


def _generate_indexed(args):
    seed, index, size, n_beams = args
    return generate_case(case_seed(seed, index), size, n_beams,
                         case_id=case_name(index))


def generate_dataset(count, seed, size=64, n_beams=9, jobs=1):
    """
    `count` cases, the i-th one named `case_{i:04d}` and generated from
    `case_seed(seed, i)`; the result does not depend on `jobs`
    """
    tasks = [(seed, index, size, n_beams) for index in range(count)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            cases = list(pool.map(_generate_indexed, tasks))
    else:
        cases = [_generate_indexed(task) for task in tasks]
    logger.debug("generated %d cases of size %d", count, size)
    return cases


def split_sizes(n_items, fractions):
    """
    Split `n_items` by `fractions`, rounding with the largest remainder
    method so that the sizes add up to `n_items`
    """
    fractions = np.asarray(fractions, dtype=np.float64)
    check(fractions.shape == (3,), "three fractions needed (train, val, "
          "test), got %s", list(fractions))
    check(np.all(fractions >= 0) and abs(fractions.sum() - 1.0) <= 1e-9,
          "fractions must be non-negative and sum to 1, got %s",
          list(fractions))
    raw = n_items * fractions
    sizes = np.floor(raw).astype(int)
    remainders = raw - sizes
    # stable sort: ties go to the earlier split
    for idx in np.argsort(-remainders, kind='stable')[:n_items - sizes.sum()]:
        sizes[idx] += 1
    for size, fraction, name in zip(sizes, fractions,
                                    ('train', 'validation', 'test')):
        check(size > 0 or fraction == 0,
              "the %s split is empty (%d items, fraction %g)",
              name, n_items, fraction)
    return [int(size) for size in sizes]


def split_dataset(cases, fractions, seed):
    """
    Shuffle the cases with `seed` and cut them into train, validation
    and test lists

    :rtype: ([case], [case], [case])
    """
    n_train, n_val, _ = split_sizes(len(cases), fractions)
    order = seeded_rng(seed).permutation(len(cases))
    shuffled = [cases[i] for i in order]
    return (shuffled[:n_train],
            shuffled[n_train:n_train + n_val],
            shuffled[n_train + n_val:])


def case_from_json(meta, x, y):
    "rebuild a case from its metadata and arrays"
    beams = [BeamSpec(**beam) for beam in meta.get('beams', [])]
    return PhantomCase(meta['case_id'], x, y, meta.get('seed', 0), beams)

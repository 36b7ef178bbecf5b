# License: BSD3

"""
Dosimetric summaries of a dose map over a structure: D_m order
statistics, maximum and mean dose, the homogeneity index, and dose
volume histograms.

All functions take doses as arrays of any shape (typically [1, H, W] or
[H, W]) and boolean masks of the same number of elements.
"""

from collections import namedtuple
import logging
import math

import numpy as np
import pandas as pd

from ..internalutil import check

logger = logging.getLogger(__name__)

HI_DIVISORS = ('d50', 'prescription')


def masked_values(dose, mask):
    """
    The dose values inside a mask, as float64

    Raises
    ------
    ContractError
        if the mask is empty or does not match the dose map
    """
    dose = np.asarray(dose, dtype=np.float64).ravel()
    mask = np.asarray(mask).astype(bool).ravel()
    check(dose.size == mask.size,
          "dose map (%d values) and mask (%d values) do not match",
          dose.size, mask.size)
    check(mask.any(), "the structure mask is empty")
    return dose[mask]


def coverage_rank(m, n_voxels):
    """
    Index (into doses sorted in descending order) of the dose that
    covers `m` percent of `n_voxels`
    """
    # rounding keeps m * n / 100 from landing just above an integer
    return max(int(math.ceil(round(m * n_voxels / 100.0, 9))) - 1, 0)


def dose_at_volume(dose, mask, m):
    """
    D_m: the largest dose level that at least `m` percent of the masked
    voxels receive.

    Parameters
    ----------
    m : float
        percentage of the volume, 0 < m <= 100

    Notes
    -----
    The masked doses are sorted in descending order and the one at
    index ``ceil(m/100 * n) - 1`` is returned, so D_100 is the minimum
    masked dose and a uniform dose u gives u for every m.
    """
    check(0 < m <= 100, "volume percentage must be in (0, 100], got %s", m)
    values = np.sort(masked_values(dose, mask))[::-1]
    return float(values[coverage_rank(m, values.size)])


class DoseSummary(namedtuple('DoseSummary', 'd98 d2 dmax dmean hi')):
    """
    The PTV summary of one dose map; `hi` is NaN when undefined
    """
    def to_dict(self):
        return dict(self._asdict())


def homogeneity_index(d2, d98, divisor):
    "(D2 - D98) / divisor, NaN (with a warning) when the divisor is 0"
    if divisor == 0:
        logger.warning("homogeneity index undefined (zero divisor), "
                       "reporting NaN")
        return float('nan')
    return (d2 - d98) / divisor


def summary_metrics(dose, ptv_mask, hi_divisor='d50', region_mask=None,
                    prescription=1.0):
    """
    D98, D2, Dmax, Dmean and HI of a dose map.

    Parameters
    ----------
    dose : array
    ptv_mask : bool array
        D98, D2 (and D50) are always taken over the PTV
    hi_divisor : 'd50' or 'prescription'
        HI = (D2 - D98) / D50, or divided by the prescription dose
    region_mask : bool array, optional
        where Dmax and Dmean are taken (default: the PTV; pass the body
        mask for whole-body values)
    prescription : float
        prescription dose, used with `hi_divisor='prescription'`

    Returns
    -------
    DoseSummary
    """
    check(hi_divisor in HI_DIVISORS, "unknown HI divisor %r", hi_divisor)
    ptv_values = masked_values(dose, ptv_mask)
    region_values = ptv_values if region_mask is None \
        else masked_values(dose, region_mask)
    d98 = dose_at_volume(dose, ptv_mask, 98)
    d2 = dose_at_volume(dose, ptv_mask, 2)
    if hi_divisor == 'd50':
        divisor = dose_at_volume(dose, ptv_mask, 50)
    else:
        divisor = prescription
    return DoseSummary(d98=d98,
                       d2=d2,
                       dmax=float(region_values.max()),
                       dmean=float(region_values.mean()),
                       hi=homogeneity_index(d2, d98, divisor))


class DvhCurve(namedtuple('DvhCurve', 'name dose volume')):
    """
    Cumulative dose volume histogram of one structure: for each level of
    an ascending dose grid, the fraction of the structure receiving at
    least that dose
    """
    def to_frame(self):
        ":: pandas.DataFrame"
        return pd.DataFrame({'structure': self.name,
                             'dose': self.dose,
                             'volume': self.volume},
                            columns=['structure', 'dose', 'volume'])


def dvh(dose, mask, n_bins=100, max_dose=None, name=''):
    """
    DVH over `n_bins` evenly spaced levels from 0 to `max_dose`
    (default: the maximum of the whole dose map, so that curves of
    different structures share a grid).  Negative doses count as 0, so
    every curve starts at volume 1.

    :rtype: DvhCurve
    """
    check(n_bins >= 2, "a DVH needs at least 2 bins, got %s", n_bins)
    values = np.sort(np.maximum(masked_values(dose, mask), 0.0))
    if max_dose is None:
        max_dose = max(float(np.max(dose)), 0.0)
    levels = np.linspace(0.0, max_dose, n_bins)
    below = np.searchsorted(values, levels, side='left')
    volume = (values.size - below) / float(values.size)
    return DvhCurve(name, levels, volume)

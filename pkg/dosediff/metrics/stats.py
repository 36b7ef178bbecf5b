# License: BSD3

"""
Paired t-test over per-case metric values
"""

from collections import namedtuple
import math

import numpy as np
from scipy.special import betainc

from ..internalutil import check

SIGNIFICANCE = 0.05

TTestResult = namedtuple('TTestResult', 't p n degenerate')
"""
t statistic, two-tailed p-value, number of pairs, and whether the
differences had zero variance (in which case t is 0 or infinite by
convention)
"""


def t_two_tailed_p(t, df):
    """
    Two-tailed p-value of a t statistic with `df` degrees of freedom,
    through the regularized incomplete beta function
    """
    if math.isinf(t):
        return 0.0
    return float(betainc(df / 2.0, 0.5, df / (df + t * t)))


def paired_t_test(a, b):
    """
    Paired t-test on the differences ``a - b``.

    Zero-variance differences give ``t = +/-inf, p = 0`` when their mean
    is nonzero and ``t = 0, p = 1`` when it is zero.

    :rtype: TTestResult
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    check(a.size == b.size, "paired samples differ in length (%d vs %d)",
          a.size, b.size)
    check(a.size >= 2, "a paired t-test needs at least 2 pairs, got %d",
          a.size)
    diffs = a - b
    n_pairs = diffs.size
    mean = diffs.mean()
    if np.all(diffs == diffs[0]):
        if mean == 0:
            return TTestResult(0.0, 1.0, n_pairs, True)
        return TTestResult(math.copysign(float('inf'), mean), 0.0, n_pairs,
                           True)
    stderr = diffs.std(ddof=1) / math.sqrt(n_pairs)
    t_stat = float(mean / stderr)
    return TTestResult(t_stat, t_two_tailed_p(t_stat, n_pairs - 1), n_pairs,
                       False)

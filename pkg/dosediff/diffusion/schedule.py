# License: BSD3

"""
Noise schedules.

Steps are numbered from 1 to T as in the usual presentation of the
forward process; the arrays are stored zero-based, so step `t` lives at
index `t - 1`.
"""

import numpy as np

from ..internalutil import check


class NoiseSchedule(object):
    """
    Per-step noise variances and the quantities derived from them.

    Attributes
    ----------
    T : int
        number of steps
    beta : ndarray [T]
        per-step noise variance
    alpha : ndarray [T]
        `1 - beta`
    gamma : ndarray [T]
        cumulative product of alpha (the noise intensity)
    sigma : ndarray [T]
        `sqrt(1 - alpha)`, standard deviation of the reverse step noise
    """
    def __init__(self, beta):
        beta = np.asarray(beta, dtype=np.float64)
        check(beta.ndim == 1 and beta.size >= 1,
              "a schedule needs at least one step")
        check(np.all((beta > 0) & (beta < 1)),
              "noise variances must lie in (0, 1)")
        self.T = beta.size
        self.beta = beta
        self.alpha = 1.0 - beta
        self.gamma = np.cumprod(self.alpha)
        self.sigma = np.sqrt(beta)

    def check_step(self, t):
        "complain unless every step in `t` lies in 1..T"
        steps = np.asarray(t)
        check(np.all((steps >= 1) & (steps <= self.T)),
              "step %s outside 1..%d", t, self.T)

    def at(self, name, t):
        """
        Schedule values at step(s) `t` (1-based); an array of steps gives
        an array of values
        """
        self.check_step(t)
        return getattr(self, name)[np.asarray(t) - 1]

    def __repr__(self):
        return "NoiseSchedule(T=%d, beta=%g..%g)" % (self.T, self.beta[0],
                                                     self.beta[-1])


def build_schedule(T, beta_start, beta_end):
    """
    Linear schedule of noise variances from `beta_start` at step 1 to
    `beta_end` at step T.

    Either direction is accepted: the dose prediction setup starts
    at 1e-2 and decays to 1e-4, the classic one rises from 1e-4 to 2e-2.
    """
    check(int(T) == T and T >= 1, "T must be a positive integer, got %s", T)
    check(0 < beta_start < 1 and 0 < beta_end < 1,
          "noise variances must lie in (0, 1), got %s and %s",
          beta_start, beta_end)
    return NoiseSchedule(np.linspace(beta_start, beta_end, int(T)))

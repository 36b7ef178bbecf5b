# License: BSD3

"""
Utility functions which are meant to be used by dosediff but aren't
expected to be too useful outside of it
"""

import numpy as np


class DosediffError(Exception):
    """
    Root of the errors raised on purpose by dosediff
    """
    def __init__(self, *args, **kw):
        Exception.__init__(self, *args, **kw)


class ContractError(DosediffError, ValueError):
    """
    A function was called with arguments outside its contract
    (wrong shapes, out of range parameters, empty masks...)
    """
    pass


def check(condition, message, *args):
    """
    Raise a `ContractError` with the %-formatted message unless the
    condition holds
    """
    if not condition:
        raise ContractError(message % args if args else message)


def seeded_rng(*seeds):
    """
    A numpy random generator from one or more integer seeds.

    Several seeds are mixed through a `SeedSequence`, which gives us
    independent streams for (seed, case index) style pairs
    """
    return np.random.default_rng(np.random.SeedSequence(list(seeds)))

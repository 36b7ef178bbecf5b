# License: BSD3

"""
Parameter initialisation
"""

import numpy as np
from scipy.stats import truncnorm

from .tensor import Tensor


def truncated_normal(shape, fan_in, rng, scale=1.0):
    """
    Parameter tensor drawn from a normal with standard deviation
    `scale / sqrt(fan_in)`, truncated at two standard deviations
    """
    std = scale / np.sqrt(fan_in)
    values = truncnorm.rvs(-2.0, 2.0, size=shape, random_state=rng) * std
    return Tensor(values, requires_grad=True)


def zeros(shape):
    "zero parameter tensor"
    return Tensor(np.zeros(shape), requires_grad=True)


def ones(shape):
    "parameter tensor of ones"
    return Tensor(np.ones(shape), requires_grad=True)

# License: BSD3

"""
Finite difference gradient checks.

Both the analytic and the numeric gradients are computed in float64,
so that the check measures the backward rules rather than rounding.
Tensors passed to `check_tensor_gradients` should therefore have been
created under `precision(np.float64)`.
"""

from collections import namedtuple

import numpy as np

from .tensor import GradientTape, Tensor, precision

GradientMismatch = namedtuple('GradientMismatch',
                              'input index analytic numeric')


def _component_indices(shape, per_tensor, rng):
    "all indices of a shape, or a random subset of them"
    indices = list(np.ndindex(*shape))
    if per_tensor is None or len(indices) <= per_tensor:
        return indices
    picks = rng.choice(len(indices), size=per_tensor, replace=False)
    return [indices[i] for i in sorted(picks)]


def numeric_derivative(loss_fn, tensor, index, h=1e-3):
    "central difference of the scalar `loss_fn()` in one component"
    orig = tensor.data[index]
    tensor.data[index] = orig + h
    plus = loss_fn().item()
    tensor.data[index] = orig - h
    minus = loss_fn().item()
    tensor.data[index] = orig
    return (plus - minus) / (2 * h)


def check_tensor_gradients(loss_fn, tensors, h=1e-3, rtol=1e-2, floor=1e-4,
                           per_tensor=None, seed=0):
    """
    Compare analytic and numeric gradients of a scalar function of some
    existing tensors.

    Parameters
    ----------
    loss_fn : () -> Tensor
        recomputes the scalar loss from the current tensor values
    tensors : list of Tensor
        float64 tensors with `requires_grad` set
    h : float
        central difference step
    rtol : float
        relative tolerance on components whose analytic gradient
        exceeds `floor` in absolute value
    floor : float
        components with a smaller analytic gradient are not compared
    per_tensor : int or None
        only check this many randomly chosen components of each tensor
    seed : int
        for the choice of components

    Returns
    -------
    list of GradientMismatch (empty when the check passes)
    """
    rng = np.random.default_rng(seed)
    mismatches = []
    with precision(np.float64):
        with GradientTape() as tape:
            loss = loss_fn()
        tape.backward(loss, params=tensors)
        analytic = [t.grad.copy() for t in tensors]
        for which, tensor in enumerate(tensors):
            for idx in _component_indices(tensor.shape, per_tensor, rng):
                ana = analytic[which][idx]
                if abs(ana) <= floor:
                    continue
                num = numeric_derivative(loss_fn, tensor, idx, h=h)
                if abs(ana - num) / abs(ana) > rtol:
                    mismatches.append(GradientMismatch(which, idx, ana, num))
    return mismatches


def check_gradients(func, arrays, **kwargs):
    """
    Gradient check of `func(*tensors)` with respect to every input,
    the inputs being built from the given arrays.

    See `check_tensor_gradients` for the keyword arguments
    """
    with precision(np.float64):
        inputs = [Tensor(np.array(a, dtype=np.float64), requires_grad=True)
                  for a in arrays]
    return check_tensor_gradients(lambda: func(*inputs), inputs, **kwargs)

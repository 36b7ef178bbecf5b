# License: BSD3

"""
Adam optimizer
"""

import numpy as np

from ..internalutil import check


class AdamState(object):
    """
    Moment estimates and hyperparameters of an Adam optimizer.

    Moments are kept per parameter position, so always pass the
    parameters to `adam_step` in the same order.
    """
    def __init__(self, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.first = []
        "first moment buffers"
        self.second = []
        "second moment buffers"

    def _ensure(self, params):
        if not self.first:
            self.first = [np.zeros_like(p.data) for p in params]
            self.second = [np.zeros_like(p.data) for p in params]
        check(len(self.first) == len(params),
              "Adam state holds %d parameters, got %d",
              len(self.first), len(params))
        for buf, param in zip(self.first, params):
            check(buf.shape == param.shape,
                  "Adam moment shape %s does not match parameter %s",
                  buf.shape, param.shape)


def adam_step(params, state):
    """
    One bias-corrected Adam update of the parameters, in place.

    Gradients are left untouched; zero them yourself if needed.
    """
    for idx, param in enumerate(params):
        check(param.grad is not None,
              "parameter %d (shape %s) has no gradient", idx, param.shape)
    state._ensure(params)
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for param, first, second in zip(params, state.first, state.second):
        grad = param.grad
        first *= state.beta1
        first += (1.0 - state.beta1) * grad
        second *= state.beta2
        second += (1.0 - state.beta2) * (grad * grad)
        denom = np.sqrt(second / bc2) + state.eps
        param.data -= (state.lr / bc1 * first / denom).astype(param.data.dtype)


def zero_grads(params):
    "forget the gradients of the parameters"
    for param in params:
        param.grad = None

# License: BSD3

"""
Forward (noising) and reverse (denoising) diffusion processes.

Every function here accepts either a single step `t` (int) or one step
per batch element (an integer array of length N, the leading axis of
the tensors).
"""

from collections import namedtuple
import logging

import numpy as np

from ..internalutil import check
from ..learning import progress
from ..numerics.tensor import Tensor, add, as_tensor, mul, sub

logger = logging.getLogger(__name__)

DiffusionSample = namedtuple('DiffusionSample', 'y_t t epsilon')
"""
A noised dose map together with its step and the noise realised
"""


def _coefficient(values, like):
    """
    Schedule values as a tensor broadcasting over `like`: a scalar, or
    one value per batch element
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 0:
        return Tensor(values)
    check(values.shape[0] == like.shape[0],
          "%d steps given for a batch of %d", values.shape[0], like.shape[0])
    return Tensor(values.reshape((-1,) + (1,) * (like.ndim - 1)))


def _check_congruent(left, right, what):
    check(left.shape == right.shape, "%s shape %s does not match %s",
          what, right.shape, left.shape)


def forward_sample(y0, t, epsilon, sched):
    """
    Noised dose map at step t in closed form:
    `sqrt(gamma_t) y0 + sqrt(1 - gamma_t) epsilon`
    """
    y0, epsilon = as_tensor(y0), as_tensor(epsilon)
    _check_congruent(y0, epsilon, 'noise')
    gamma = sched.at('gamma', t)
    return add(mul(y0, _coefficient(np.sqrt(gamma), y0)),
               mul(epsilon, _coefficient(np.sqrt(1.0 - gamma), y0)))


def forward_step(y_prev, t, epsilon, sched):
    """
    One step of the forward chain:
    `sqrt(alpha_t) y_prev + sqrt(1 - alpha_t) epsilon`
    """
    y_prev, epsilon = as_tensor(y_prev), as_tensor(epsilon)
    _check_congruent(y_prev, epsilon, 'noise')
    alpha = sched.at('alpha', t)
    return add(mul(y_prev, _coefficient(np.sqrt(alpha), y_prev)),
               mul(epsilon, _coefficient(np.sqrt(1.0 - alpha), y_prev)))


def noise(y0, t, sched, rng):
    """
    Draw the noise and apply `forward_sample`, returning a
    `DiffusionSample`
    """
    epsilon = Tensor(rng.standard_normal(as_tensor(y0).shape))
    return DiffusionSample(forward_sample(y0, t, epsilon, sched), t, epsilon)


def posterior_mean(y_t, eps_hat, t, sched):
    """
    Mean of the reverse step given a noise estimate:
    `(y_t - (1 - alpha_t) / sqrt(1 - gamma_t) eps_hat) / sqrt(alpha_t)`
    """
    y_t, eps_hat = as_tensor(y_t), as_tensor(eps_hat)
    _check_congruent(y_t, eps_hat, 'noise estimate')
    alpha = sched.at('alpha', t)
    gamma = sched.at('gamma', t)
    weight = (1.0 - alpha) / np.sqrt(1.0 - gamma)
    return mul(sub(y_t, mul(eps_hat, _coefficient(weight, y_t))),
               _coefficient(1.0 / np.sqrt(alpha), y_t))


def reverse_step(y_t, eps_hat, z, t, sched):
    """
    One denoising step: `posterior_mean + sigma_t z`.

    The last step (t = 1) adds no noise, so `z` must be zero there
    (`None` stands for zero).
    """
    y_t = as_tensor(y_t)
    mean = posterior_mean(y_t, eps_hat, t, sched)
    if z is None:
        return mean
    z = as_tensor(z)
    _check_congruent(y_t, z, 'reverse noise')
    last = np.asarray(t) == 1
    if np.any(last):
        final = z.data if last.ndim == 0 else z.data[last]
        check(not np.any(final), "the final reverse step takes z = 0")
    return add(mean, mul(z, _coefficient(sched.at('sigma', t), y_t)))


def sample(x, predictor, sched, rng, show_progress=False):
    """
    Run the reverse chain from pure noise down to a dose map estimate.

    Parameters
    ----------
    x : Tensor [N, C, H, W]
        structure images
    predictor : model handle
        `predictor.condition(x)` computes the conditioning (structure
        features) once; `predictor.predict(cond, y_t, gamma)` returns
        the noise estimate, `gamma` holding one noise intensity per
        batch element
    sched : NoiseSchedule
    rng : numpy Generator
        draws y_T and the per-step noise; the result is a pure function
        of the inputs, the parameters and the generator state
    show_progress : bool
        display a progress bar over the T steps

    Returns
    -------
    Tensor [N, 1, H, W]
        the estimate of y_0, in normalised units
    """
    x = as_tensor(x)
    n_batch = x.shape[0]
    shape = (n_batch, 1) + x.shape[2:]
    cond = predictor.condition(x)
    y_t = Tensor(rng.standard_normal(shape))
    steps = range(sched.T, 0, -1)
    if show_progress:
        steps = progress(steps, 'sampling', total=sched.T)
    for t in steps:
        gamma = np.full(n_batch, sched.gamma[t - 1])
        eps_hat = predictor.predict(cond, y_t, gamma)
        z = Tensor(rng.standard_normal(shape)) if t > 1 else None
        y_t = reverse_step(y_t, eps_hat, z, t, sched)
    return y_t


class DoseScaler(object):
    """
    Affine map between doses in [0, dose_max] and the [-1, 1] range
    the diffusion works in
    """
    def __init__(self, dose_max):
        check(dose_max > 0, "dose_max must be positive")
        self.dose_max = float(dose_max)

    def normalize(self, dose):
        ":: dose array -> normalised array"
        return np.asarray(dose) * (2.0 / self.dose_max) - 1.0

    def denormalize(self, values):
        "back to dose units, clamped to [0, dose_max]"
        dose = (np.asarray(values) + 1.0) * (self.dose_max / 2.0)
        return np.clip(dose, 0.0, self.dose_max)


def predict_dose(model, x, sched, scaler, rng, show_progress=False):
    """
    Sample dose maps for structure images and convert them to dose
    units (float32 array [N, 1, H, W])
    """
    estimate = sample(x, model, sched, rng, show_progress=show_progress)
    return scaler.denormalize(estimate.data).astype(np.float32)

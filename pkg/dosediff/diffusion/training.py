# License: BSD3

"""
Training the noise predictor (and the structure encoder with it).

A training step samples one step `t` per batch element and standard
normal noise, noises the dose map in closed form, and takes one Adam
step on the mean absolute error between the predicted and the real
noise.
"""

import logging

from ..internalutil import check, seeded_rng
from ..learning import (DivergenceError, EarlyStopping, LossCurve,
                        check_finite, iterate_batches, l1_loss,
                        learning_rate, progress)
from ..numerics.optim import AdamState, adam_step
from ..numerics.tensor import GradientTape, Tensor, as_tensor
from .process import forward_sample

logger = logging.getLogger(__name__)

__all__ = ['DivergenceError', 'training_step', 'diffusion_loss',
           'validation_loss', 'train_diffusion']


def diffusion_loss(model, x, y0, sched, rng):
    """
    The objective on one batch, as a tensor (recorded if a tape is
    active).  `y0` is in normalised units.
    """
    x, y0 = as_tensor(x), as_tensor(y0)
    check(x.shape[0] == y0.shape[0] and x.shape[2:] == y0.shape[2:],
          "structure batch %s does not match dose batch %s",
          x.shape, y0.shape)
    steps = rng.integers(1, sched.T + 1, size=y0.shape[0])
    epsilon = Tensor(rng.standard_normal(y0.shape))
    y_t = forward_sample(y0, steps, epsilon, sched)
    eps_hat = model.predict(model.condition(x), y_t,
                            sched.at('gamma', steps))
    return l1_loss(eps_hat, epsilon)


def training_step(x, y0, model, sched, opt, rng):
    """
    One optimisation step on a batch.

    Parameters
    ----------
    x : Tensor [N, C, H, W]
        structure images
    y0 : Tensor [N, 1, H, W]
        dose maps, normalised to [-1, 1]
    model : model handle
        `parameters()`, `condition(x)` and `predict(cond, y_t, gamma)`
    sched : NoiseSchedule
    opt : AdamState
    rng : numpy Generator

    Returns
    -------
    float
        the batch loss before the update

    Raises
    ------
    DivergenceError
        if the loss is not finite; parameters are not updated then
    """
    params = model.parameters()
    with GradientTape() as tape:
        loss = diffusion_loss(model, x, y0, sched, rng)
    value = check_finite(loss.item(), opt.step + 1)
    tape.backward(loss, params=params)
    adam_step(params, opt)
    return value


def validation_loss(model, xs, ys, sched, config, seed):
    """
    Mean objective over a dataset with a fixed seed (no gradients), so
    that successive epochs are comparable
    """
    rng = seeded_rng(seed)
    total, count = 0.0, 0
    for start in range(0, len(xs), config.batch_size):
        x = xs[start:start + config.batch_size]
        y = ys[start:start + config.batch_size]
        total += diffusion_loss(model, x, y, sched, rng).item() * len(x)
        count += len(x)
    return total / count


def train_diffusion(model, xs, ys, sched, config, val_data=None,
                    on_epoch=None):
    """
    Repeat training steps over the dataset for `config.epochs` epochs
    (or until early stopping kicks in).

    Parameters
    ----------
    model : model handle
    xs : ndarray [N, C, H, W]
        structure images of the training cases
    ys : ndarray [N, 1, H, W]
        normalised dose maps of the training cases
    sched : NoiseSchedule
    config : RunConfig
        uses `epochs`, `batch_size`, `lr`, `lr_drop_epoch`,
        `lr_dropped`, `patience` and `seed`
    val_data : (ndarray, ndarray), optional
        validation structure images and normalised doses
    on_epoch : callable(epoch, model), optional
        called after every epoch (eg. to write checkpoints)

    Returns
    -------
    LossCurve
    """
    rng = seeded_rng(config.seed, 1)
    opt = AdamState(lr=config.lr)
    curve = LossCurve()
    stopper = EarlyStopping(config.patience)
    for epoch in progress(range(config.epochs), 'training'):
        opt.lr = learning_rate(config, epoch)
        for batch in iterate_batches(len(xs), config.batch_size, rng):
            loss = training_step(xs[batch], ys[batch], model, sched, opt,
                                 rng)
            curve.add(epoch, opt.step, loss, opt.lr)
        if on_epoch is not None:
            on_epoch(epoch, model)
        if val_data is not None and len(val_data[0]):
            val_loss = validation_loss(model, val_data[0], val_data[1],
                                       sched, config, config.seed + 2)
            curve.set_val_loss(val_loss)
            logger.debug("epoch %d: val loss %.5f", epoch, val_loss)
            if stopper.update(val_loss):
                logger.info("no improvement for %d epochs, stopping after "
                            "epoch %d", config.patience, epoch)
                break
    if len(curve):
        logger.info("trained %d steps, last loss %.5f",
                    len(curve), curve.rows[-1].loss)
    return curve

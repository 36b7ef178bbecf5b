# License: BSD3

"""
Plain UNet regressing the dose directly from the structure images,
trained with an L1 loss.  It serves as the over-smoothing reference for
the diffusion model.
"""

import logging

from ..internalutil import check, seeded_rng
from ..learning import (EarlyStopping, LossCurve, check_finite,
                        iterate_batches, l1_loss, learning_rate, progress)
from ..numerics.optim import AdamState, adam_step
from ..numerics.tensor import GradientTape, as_tensor
from .encoder import StructureEncoder
from .layers import Module, OutputHead, ResBlock, build_decoder, decode

logger = logging.getLogger(__name__)


class BaselineUNet(Module):
    """
    The structure encoder layout as contracting path, two ResBlocks at
    the bottom and the noise predictor's decoder layout (without noise
    embedding) as expanding path
    """
    def __init__(self, in_channels, widths, rng):
        w = list(widths)
        self.encoder = StructureEncoder(in_channels, w, rng)
        self.mid1 = ResBlock(w[5], w[5], rng)
        self.mid2 = ResBlock(w[5], w[5], rng)
        self.decoder = build_decoder(w, rng)
        self.head = OutputHead(w[0], rng)

    def forward(self, inputs):
        skips = self.encoder(inputs)
        hidden = self.mid2(self.mid1(skips[-1]))
        return self.head(decode(self.decoder, hidden, skips))


def baseline_unet_predict(b, x):
    """
    Direct dose regression (normalised units) for structure images
    [N, C, H, W]
    """
    return b(x)


def _mean_loss(model, xs, ys, batch_size):
    total = 0.0
    for start in range(0, len(xs), batch_size):
        x = xs[start:start + batch_size]
        y = ys[start:start + batch_size]
        total += l1_loss(model(x), as_tensor(y)).item() * len(x)
    return total / len(xs)


def train_baseline(model, xs, ys, config, val_data=None, on_epoch=None):
    """
    L1 training of a `BaselineUNet` on normalised doses; same schedule,
    batching and early stopping as the diffusion training

    :rtype: LossCurve
    """
    check(len(xs) == len(ys) and len(xs) > 0,
          "need as many dose maps as structure images (got %d and %d)",
          len(xs), len(ys))
    rng = seeded_rng(config.seed, 1)
    params = model.parameters()
    opt = AdamState(lr=config.lr)
    curve = LossCurve()
    stopper = EarlyStopping(config.patience)
    for epoch in progress(range(config.epochs), 'baseline'):
        opt.lr = learning_rate(config, epoch)
        for batch in iterate_batches(len(xs), config.batch_size, rng):
            with GradientTape() as tape:
                loss = l1_loss(model(xs[batch]), as_tensor(ys[batch]))
            value = check_finite(loss.item(), opt.step + 1)
            tape.backward(loss, params=params)
            adam_step(params, opt)
            curve.add(epoch, opt.step, value, opt.lr)
        if on_epoch is not None:
            on_epoch(epoch, model)
        if val_data is not None and len(val_data[0]):
            val_loss = _mean_loss(model, val_data[0], val_data[1],
                                  config.batch_size)
            curve.set_val_loss(val_loss)
            if stopper.update(val_loss):
                logger.info("baseline: no improvement for %d epochs, "
                            "stopping after epoch %d", config.patience, epoch)
                break
    return curve

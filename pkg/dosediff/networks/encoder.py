# License: BSD3

"""
Structure encoder: multi-level features of the CT and the structure
masks, and its pretraining by L1 regression of the dose.
"""

import logging

import numpy as np

from ..diffusion.process import DoseScaler
from ..internalutil import check, seeded_rng
from ..learning import (LossCurve, check_finite, iterate_batches, l1_loss,
                        learning_rate, progress)
from ..numerics.optim import AdamState, adam_step
from ..numerics.ops import nearest_upsample2x
from ..numerics.tensor import GradientTape, add, as_tensor
from .layers import Conv, ConvBlock, Down, Module, ResBlock

logger = logging.getLogger(__name__)

N_LEVELS = 6
SIZE_MULTIPLE = 16


def check_spatial_size(inputs):
    "networks need H and W divisible by 16 (four stride 2 reductions)"
    height, width = inputs.shape[-2:]
    check(height % SIZE_MULTIPLE == 0 and width % SIZE_MULTIPLE == 0,
          "image size %dx%d is not divisible by %d",
          height, width, SIZE_MULTIPLE)


class EncoderStage(Module):
    "ResBlock, followed by a Down block unless this is the last stage"
    def __init__(self, in_channels, out_channels, rng, down=True,
                 emb_channels=None):
        self.res = ResBlock(in_channels, out_channels, rng,
                            emb_channels=emb_channels)
        self.down = Down(out_channels, rng) if down else None

    def forward(self, inputs, emb=None):
        hidden = self.res(inputs, emb)
        if self.down is not None:
            hidden = self.down(hidden)
        return hidden


def build_stages(widths, rng, emb_channels=None):
    "the five ResBlock (+ Down) stages going from level 0 to level 5"
    return [EncoderStage(widths[k - 1], widths[k], rng,
                         down=k < N_LEVELS - 1, emb_channels=emb_channels)
            for k in range(1, N_LEVELS)]


class StructureEncoder(Module):
    """
    Input convolution (level 0) followed by five stages.

    For an input of size H x W the six levels have sizes H, H/2, H/4,
    H/8, H/16 and H/16 (the last stage does not downsample), with
    `widths[k]` channels at level k.

    Parameters
    ----------
    in_channels : int
        2 + number of OAR masks
    widths : sequence of 6 ints
    rng : numpy Generator
        for the initial weights
    """
    def __init__(self, in_channels, widths, rng):
        check(len(widths) == N_LEVELS, "six channel widths needed, got %d",
              len(widths))
        self.in_conv = Conv(in_channels, widths[0], rng)
        self.stages = build_stages(widths, rng)
        self._widths = tuple(widths)

    @property
    def widths(self):
        return self._widths

    @property
    def in_channels(self):
        return self.in_conv.in_channels

    def forward(self, inputs):
        inputs = as_tensor(inputs)
        check(inputs.ndim == 4 and inputs.shape[1] == self.in_channels,
              "structure encoder expects [N, %d, H, W], got %s",
              self.in_channels, inputs.shape)
        check_spatial_size(inputs)
        hidden = self.in_conv(inputs)
        levels = [hidden]
        for stage in self.stages:
            hidden = stage(hidden)
            levels.append(hidden)
        return levels


def encode_structure(enc, x):
    """
    The six feature maps of a batch of structure images

    :rtype: [Tensor]
    """
    return enc(x)


# ---------------------------------------------------------------------
# pretraining
# ---------------------------------------------------------------------

class MirrorDecoder(Module):
    """
    Lightweight decoder used only to pretrain the structure encoder.

    Going from the deepest level up, the running features are
    upsampled where the resolution changes, projected to the level's
    width, added to that level's features and passed through a
    ConvBlock; a last convolution maps level 0 to one channel.
    """
    def __init__(self, widths, rng):
        self.projections = [Conv(widths[k + 1], widths[k], rng, kernel=1)
                            for k in range(N_LEVELS - 1)]
        self.blocks = [ConvBlock(widths[k], widths[k], rng)
                       for k in range(N_LEVELS - 1)]
        self.out_conv = Conv(widths[0], 1, rng)

    def forward(self, levels):
        hidden = levels[-1]
        for k in range(N_LEVELS - 2, -1, -1):
            if levels[k].shape[-1] != hidden.shape[-1]:
                hidden = nearest_upsample2x(hidden)
            hidden = add(self.projections[k](hidden), levels[k])
            hidden = self.blocks[k](hidden)
        return self.out_conv(hidden)


def pretrain_structure_encoder(cases, config, encoder=None, curve=None):
    """
    Train a structure encoder (with a throwaway mirror decoder) to
    regress the normalised dose from the structure images.

    Parameters
    ----------
    cases : list of PhantomCase
        anything with `x` [C, H, W] and `y` [1, H, W] arrays
    config : RunConfig
        uses `widths`, `n_oars`, `dose_max`, the learning rate schedule,
        `batch_size`, `pretrain_epochs` and `seed`
    encoder : StructureEncoder, optional
        start from this encoder rather than a freshly initialised one
    curve : LossCurve, optional
        filled in with the training losses

    Returns
    -------
    StructureEncoder
    """
    check(len(cases) > 0, "cannot pretrain on an empty dataset")
    xs = np.stack([case.x for case in cases])
    ys = DoseScaler(config.dose_max).normalize(
        np.stack([case.y for case in cases]))
    rng = seeded_rng(config.seed, 10)
    if encoder is None:
        encoder = StructureEncoder(2 + config.n_oars, config.widths, rng)
    decoder = MirrorDecoder(encoder.widths, rng)
    params = encoder.parameters() + decoder.parameters()
    opt = AdamState(lr=config.lr)
    curve = curve if curve is not None else LossCurve()
    for epoch in progress(range(config.pretrain_epochs), 'pretraining'):
        opt.lr = learning_rate(config, epoch)
        for batch in iterate_batches(len(xs), config.batch_size, rng):
            with GradientTape() as tape:
                loss = l1_loss(decoder(encoder(xs[batch])),
                               as_tensor(ys[batch]))
            value = check_finite(loss.item(), opt.step + 1)
            tape.backward(loss, params=params)
            adam_step(params, opt)
            curve.add(epoch, opt.step, value, opt.lr)
    if len(curve):
        logger.info("pretrained the structure encoder for %d steps, "
                    "L1 %.4f -> %.4f", len(curve), curve.rows[0].loss,
                    curve.rows[-1].loss)
    return encoder

# License: BSD3

"""
Noise predictor: a six-level UNet over the noisy dose map, conditioned
on the noise intensity and (in the fused variant) on the structure
encoder features.

The structure features join the predictor encoder after each level:
by element-wise addition at levels 0 to 2, by cross-attention (queries
from the predictor, keys and values from the structure features) at
levels 3 to 5.  The encoder outputs, after fusion, are the skips of the
decoder.
"""

import numpy as np

from ..internalutil import check
from ..numerics.tensor import add, as_tensor
from .encoder import N_LEVELS, build_stages, check_spatial_size
from .layers import (AttentionBlock, Conv, Module, NoiseLevelEmbedding,
                     OutputHead, ResBlock, build_decoder, decode)

# levels below this are fused by addition, the others by cross-attention
FIRST_ATTENTION_LEVEL = 3


class NoisePredictor(Module):
    """
    Parameters
    ----------
    in_channels : int
        1 for the fused variant (the noisy dose map alone), 1 + the
        structure channels when the structure image is concatenated to
        the input instead
    widths : sequence of 6 ints
        channel counts per level; the structure encoder must use the
        same widths for fusion
    emb_dim : int
        size of the sinusoidal noise level features
    rng : numpy Generator
    fusion : bool
        whether to build the fusion junctions (and require structure
        features when predicting)
    """
    def __init__(self, in_channels, widths, emb_dim, rng, fusion=True):
        check(len(widths) == N_LEVELS, "six channel widths needed, got %d",
              len(widths))
        w = list(widths)
        self.embedding = NoiseLevelEmbedding(emb_dim, rng)
        emb_channels = self.embedding.out_channels
        self.in_conv = Conv(in_channels, w[0], rng)
        self.stages = build_stages(w, rng, emb_channels=emb_channels)
        self.cross_attention = [AttentionBlock(w[k], rng, w[k])
                                for k in range(FIRST_ATTENTION_LEVEL,
                                               N_LEVELS)] if fusion else []
        self.mid1 = ResBlock(w[5], w[5], rng, emb_channels=emb_channels)
        self.mid_attention = AttentionBlock(w[5], rng)
        self.mid2 = ResBlock(w[5], w[5], rng, emb_channels=emb_channels)
        self.decoder = build_decoder(w, rng, emb_channels=emb_channels)
        self.head = OutputHead(w[0], rng)
        self._fusion = fusion
        self._widths = tuple(w)

    @property
    def fusion(self):
        return self._fusion

    @property
    def widths(self):
        return self._widths

    @property
    def in_channels(self):
        return self.in_conv.in_channels

    def _fuse(self, level, hidden, x_e):
        if not self._fusion:
            return hidden
        feature = as_tensor(x_e[level])
        check(feature.shape == hidden.shape,
              "structure features at level %d have shape %s, expected %s",
              level, feature.shape, hidden.shape)
        if level < FIRST_ATTENTION_LEVEL:
            return add(hidden, feature)
        block = self.cross_attention[level - FIRST_ATTENTION_LEVEL]
        return block(hidden, feature)

    def forward(self, x_e, y_t, gamma):
        y_t = as_tensor(y_t)
        check(y_t.ndim == 4 and y_t.shape[1] == self.in_channels,
              "noise predictor expects [N, %d, H, W], got %s",
              self.in_channels, y_t.shape)
        check_spatial_size(y_t)
        n_batch = y_t.shape[0]
        gamma = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
        if gamma.size == 1:
            gamma = np.repeat(gamma, n_batch)
        check(gamma.shape == (n_batch,),
              "%d noise levels given for a batch of %d", gamma.size, n_batch)
        if self._fusion:
            check(x_e is not None and len(x_e) == N_LEVELS,
                  "the fused predictor needs %d structure levels, got %s",
                  N_LEVELS, None if x_e is None else len(x_e))

        emb = self.embedding(gamma)
        hidden = self._fuse(0, self.in_conv(y_t), x_e)
        skips = [hidden]
        for level, stage in enumerate(self.stages, 1):
            hidden = self._fuse(level, stage(hidden, emb), x_e)
            skips.append(hidden)
        hidden = self.mid1(hidden, emb)
        hidden = self.mid_attention(hidden)
        hidden = self.mid2(hidden, emb)
        hidden = decode(self.decoder, hidden, skips, emb)
        return self.head(hidden)


def predict_noise(f, x_e, y_t, gamma_t):
    """
    Noise estimate for the noisy dose maps `y_t` [N, 1, H, W] given the
    structure features `x_e` (six levels) and one noise intensity per
    sample
    """
    return f(x_e, y_t, gamma_t)

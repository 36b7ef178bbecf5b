# License: BSD3

"""
Building blocks shared by the structure encoder, the noise predictor
and the baseline UNet.

A `Module` is a plain object whose attributes are parameter tensors,
other modules, or lists of modules.  Parameter names are the attribute
paths (`stages.0.res.block1.conv.weight`) in attribute definition
order, which is also the order optimizers and checkpoints see them in.
"""

from collections import OrderedDict

import numpy as np

from ..internalutil import check
from ..numerics.init import ones, truncated_normal, zeros
from ..numerics.ops import (AttentionWeights, attention, conv2d,
                            default_groups, group_norm, linear,
                            nearest_upsample2x, swish)
from ..numerics.tensor import Tensor, add, as_tensor, concat, reshape


class Module(object):
    """
    Something with parameters that maps tensors to tensors
    """
    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix=''):
        """
        (name, tensor) pairs for every parameter of this module and its
        submodules
        """
        for name, value in vars(self).items():
            if name.startswith('_'):
                continue
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                for pair in value.named_parameters(prefix + name + '.'):
                    yield pair
            elif isinstance(value, (list, tuple)):
                for idx, item in enumerate(value):
                    if isinstance(item, Module):
                        sub = '%s%s.%d.' % (prefix, name, idx)
                        for pair in item.named_parameters(sub):
                            yield pair

    def parameters(self):
        ":: [Tensor]"
        return [param for _, param in self.named_parameters()]

    def state_dict(self):
        """
        Copies of the parameter values by name
        """
        return OrderedDict((name, param.data.copy())
                           for name, param in self.named_parameters())

    def load_state_dict(self, arrays):
        """
        Overwrite parameter values from a name -> array mapping holding
        exactly our parameter names, with matching shapes.

        Everything is checked before anything is assigned.
        """
        params = OrderedDict(self.named_parameters())
        missing = [name for name in params if name not in arrays]
        unknown = [name for name in arrays if name not in params]
        check(not missing and not unknown,
              "parameter names do not match the model "
              "(missing: %s, unexpected: %s)",
              ', '.join(missing[:3]) or 'none',
              ', '.join(unknown[:3]) or 'none')
        for name, param in params.items():
            check(np.shape(arrays[name]) == param.shape,
                  "parameter %s has shape %s, expected %s",
                  name, np.shape(arrays[name]), param.shape)
        for name, param in params.items():
            param.data = np.array(arrays[name], dtype=param.data.dtype)
            param.grad = None

    def count_parameters(self):
        "total number of scalar parameters"
        return sum(param.size for param in self.parameters())


# ---------------------------------------------------------------------
# basic layers
# ---------------------------------------------------------------------

class Conv(Module):
    """
    2D convolution with a square 1x1 or 3x3 kernel and "same" padding
    (halving the size when the stride is 2)
    """
    def __init__(self, in_channels, out_channels, rng, kernel=3, stride=1):
        self.weight = truncated_normal(
            (out_channels, in_channels, kernel, kernel),
            in_channels * kernel * kernel, rng)
        self.bias = zeros(out_channels)
        self._stride = stride
        self._padding = kernel // 2

    @property
    def in_channels(self):
        return self.weight.shape[1]

    @property
    def out_channels(self):
        return self.weight.shape[0]

    def forward(self, inputs):
        return conv2d(inputs, self.weight, self.bias,
                      stride=self._stride, padding=self._padding)


class GroupNorm(Module):
    "group normalisation with a per-channel affine map"
    def __init__(self, channels, groups=None):
        self.gamma = ones(channels)
        self.beta = zeros(channels)
        self._groups = groups or default_groups(channels)

    def forward(self, inputs):
        return group_norm(inputs, self._groups, self.gamma, self.beta)


class Linear(Module):
    "fully connected layer on [N, in] inputs"
    def __init__(self, in_features, out_features, rng):
        self.weight = truncated_normal((out_features, in_features),
                                       in_features, rng)
        self.bias = zeros(out_features)

    def forward(self, inputs):
        return linear(inputs, self.weight, self.bias)


class ConvBlock(Module):
    "3x3 Conv -> GroupNorm -> Swish"
    def __init__(self, in_channels, out_channels, rng):
        self.conv = Conv(in_channels, out_channels, rng)
        self.norm = GroupNorm(out_channels)

    def forward(self, inputs):
        return swish(self.norm(self.conv(inputs)))


# ---------------------------------------------------------------------
# UNet vocabulary
# ---------------------------------------------------------------------

class ResBlock(Module):
    """
    Two ConvBlocks with a residual connection.

    When built with an embedding size, a projection of the (swished)
    noise level embedding is added per channel between the two blocks.
    The skip path is a 1x1 convolution when the channel count changes,
    the identity otherwise.
    """
    def __init__(self, in_channels, out_channels, rng, emb_channels=None):
        self.block1 = ConvBlock(in_channels, out_channels, rng)
        self.emb_proj = Linear(emb_channels, out_channels, rng) \
            if emb_channels else None
        self.block2 = ConvBlock(out_channels, out_channels, rng)
        self.skip = Conv(in_channels, out_channels, rng, kernel=1) \
            if in_channels != out_channels else None

    def forward(self, inputs, emb=None):
        hidden = self.block1(inputs)
        if self.emb_proj is not None:
            check(emb is not None, "this ResBlock needs a noise embedding")
            shift = self.emb_proj(swish(emb))
            hidden = add(hidden, reshape(shift, shift.shape + (1, 1)))
        hidden = self.block2(hidden)
        residual = inputs if self.skip is None else self.skip(inputs)
        return add(hidden, residual)


class Down(Module):
    "stride 2 3x3 convolution, same channel count"
    def __init__(self, channels, rng):
        self.conv = Conv(channels, channels, rng, stride=2)

    def forward(self, inputs):
        return self.conv(inputs)


class Up(Module):
    "nearest neighbour 2x upsampling followed by a 1x1 convolution"
    def __init__(self, in_channels, out_channels, rng):
        self.conv = Conv(in_channels, out_channels, rng, kernel=1)

    def forward(self, inputs):
        return self.conv(nearest_upsample2x(inputs))


class AttentionBlock(Module):
    """
    Single head attention with a residual connection around it.

    Queries are projected from the input itself, keys and values from
    the group normalised context (the input again for self-attention,
    structure features for cross-attention).  The output projection
    starts at zero, so a fresh block is the identity.
    """
    def __init__(self, channels, rng, context_channels=None):
        context_channels = context_channels or channels
        self.norm = GroupNorm(context_channels)
        self.wq = truncated_normal((channels, channels, 1, 1), channels, rng)
        self.bq = zeros(channels)
        self.wk = truncated_normal((channels, context_channels, 1, 1),
                                   context_channels, rng)
        self.bk = zeros(channels)
        self.wv = truncated_normal((channels, context_channels, 1, 1),
                                   context_channels, rng)
        self.bv = zeros(channels)
        self.wo = zeros((channels, channels, 1, 1))
        self.bo = zeros(channels)

    def weights(self):
        ":: AttentionWeights"
        return AttentionWeights(self.wq, self.bq, self.wk, self.bk,
                                self.wv, self.bv, self.wo, self.bo)

    def forward(self, inputs, context=None):
        context = inputs if context is None else context
        return attention(inputs, self.norm(context), self.weights())


class NoiseLevelEmbedding(Module):
    """
    Sinusoidal features of the noise intensity gamma (scaled to
    [0, 1000]), followed by Linear -> Swish -> Linear.

    Parameters
    ----------
    dim : int
        number of sinusoidal features (even)
    rng : numpy Generator
    """
    SCALE = 1000.0

    def __init__(self, dim, rng):
        check(dim >= 2 and dim % 2 == 0,
              "embedding size must be a positive even number, got %d", dim)
        half = dim // 2
        self._freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
        self.dense1 = Linear(dim, 4 * dim, rng)
        self.dense2 = Linear(4 * dim, 4 * dim, rng)

    @property
    def out_channels(self):
        return self.dense2.weight.shape[0]

    def sinusoids(self, gamma):
        ":: array [N] -> Tensor [N, dim]"
        gamma = np.atleast_1d(np.asarray(gamma, dtype=np.float64))
        args = (gamma * self.SCALE)[:, None] * self._freqs[None, :]
        return Tensor(np.concatenate([np.sin(args), np.cos(args)], axis=1))

    def forward(self, gamma):
        return self.dense2(swish(self.dense1(self.sinusoids(gamma))))


def skip_concat(hidden, skip):
    "join decoder features with an encoder skip along channels"
    return concat([as_tensor(hidden), as_tensor(skip)], axis=1)


class DecoderBlock(Module):
    """
    One decoder level: a ResBlock over the features joined with a skip,
    a second ResBlock (joined with a second skip if given), then an Up
    block unless this is the last level.
    """
    def __init__(self, in_channels, skip_channels, width, up_channels, rng,
                 emb_channels=None):
        check(1 <= len(skip_channels) <= 2,
              "a decoder block takes one or two skips")
        self.res1 = ResBlock(in_channels + skip_channels[0], width, rng,
                             emb_channels=emb_channels)
        second_in = width + (skip_channels[1] if len(skip_channels) == 2
                             else 0)
        self.res2 = ResBlock(second_in, width, rng,
                             emb_channels=emb_channels)
        self.up = Up(width, up_channels, rng) if up_channels else None
        self._n_skips = len(skip_channels)

    def forward(self, hidden, skips, emb=None):
        check(len(skips) == self._n_skips,
              "decoder block expects %d skips, got %d",
              self._n_skips, len(skips))
        hidden = self.res1(skip_concat(hidden, skips[0]), emb)
        if self._n_skips == 2:
            hidden = skip_concat(hidden, skips[1])
        hidden = self.res2(hidden, emb)
        if self.up is not None:
            hidden = self.up(hidden)
        return hidden


def build_decoder(widths, rng, emb_channels=None):
    """
    The five decoder levels for encoder widths `w0..w5`.

    The first level works at the bottleneck resolution, where the two
    deepest skips (levels 5 and 4) live; each following level consumes
    one skip (3, 2, 1, 0) and the last one has no Up block.
    """
    w = list(widths)
    check(len(w) == 6, "six channel widths needed, got %d", len(w))
    blocks = [DecoderBlock(w[5], (w[5], w[4]), w[4], w[3], rng,
                           emb_channels=emb_channels)]
    for level in (3, 2, 1, 0):
        up = w[level - 1] if level > 0 else None
        blocks.append(DecoderBlock(w[level], (w[level],), w[level], up, rng,
                                   emb_channels=emb_channels))
    return blocks


def decode(blocks, hidden, skips, emb=None):
    """
    Run the decoder levels given the six encoder skips (level order)
    """
    hidden = blocks[0](hidden, [skips[5], skips[4]], emb)
    for block, level in zip(blocks[1:], (3, 2, 1, 0)):
        hidden = block(hidden, [skips[level]], emb)
    return hidden


class OutputHead(Module):
    "GroupNorm -> Swish -> 3x3 Conv down to one channel"
    def __init__(self, channels, rng):
        self.norm = GroupNorm(channels)
        self.conv = Conv(channels, 1, rng)

    def forward(self, inputs):
        return self.conv(swish(self.norm(inputs)))

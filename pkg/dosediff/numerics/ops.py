# License: BSD3

"""
Neural network operators on `Tensor`.

All operators are differentiable with respect to every tensor argument
and follow the usual deep learning conventions: NCHW layout,
convolution as cross-correlation (no kernel flip).
"""

from collections import namedtuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..internalutil import check
from .tensor import (as_tensor, make_result,
                     add, matmul, mul, reshape, transpose)

GROUP_NORM_EPS = 1e-5


# ---------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------

def conv_output_size(size, kernel, stride, padding):
    ":: Int -> Int -> Int -> Int -> Int"
    return (size + 2 * padding - kernel) // stride + 1


def _im2col(padded, kernel, stride):
    """
    Patches of a padded NCHW array as (N, H', W', C, k, k)
    """
    windows = sliding_window_view(padded, (kernel, kernel), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    return windows.transpose(0, 2, 3, 1, 4, 5)


def conv2d(inputs, weight, bias, stride=1, padding=0):
    """
    2D cross-correlation.

    Parameters
    ----------
    inputs : Tensor [N, C_in, H, W]
    weight : Tensor [C_out, C_in, k, k]
        k must be 1 or 3
    bias : Tensor [C_out]
    stride : int
        1 or 2
    padding : int
        zero padding on every side

    Returns
    -------
    Tensor [N, C_out, H', W'] with
    H' = (H + 2 padding - k) // stride + 1
    """
    inputs, weight, bias = as_tensor(inputs), as_tensor(weight), \
        as_tensor(bias)
    check(inputs.ndim == 4, "conv2d input must be NCHW, got %s", inputs.shape)
    check(weight.ndim == 4 and weight.shape[2] == weight.shape[3],
          "conv2d weight must be [C_out, C_in, k, k], got %s", weight.shape)
    c_out, c_in, kernel, _ = weight.shape
    n_batch, channels, height, width = inputs.shape
    check(channels == c_in,
          "conv2d channel mismatch: input has %d, weight expects %d",
          channels, c_in)
    check(kernel in (1, 3), "conv2d kernel must be 1 or 3, got %d", kernel)
    check(stride in (1, 2), "conv2d stride must be 1 or 2, got %d", stride)
    check(bias.shape == (c_out,),
          "conv2d bias must have shape (%d,), got %s", c_out, bias.shape)
    check(height + 2 * padding >= kernel and width + 2 * padding >= kernel,
          "conv2d input %s too small for kernel %d", inputs.shape, kernel)

    out_h = conv_output_size(height, kernel, stride, padding)
    out_w = conv_output_size(width, kernel, stride, padding)
    pads = ((0, 0), (0, 0), (padding, padding), (padding, padding))
    padded = np.pad(inputs.data, pads)
    cols = _im2col(padded, kernel, stride)
    cols = cols.reshape(n_batch * out_h * out_w, c_in * kernel * kernel)
    wmat = weight.data.reshape(c_out, -1)
    out = cols.dot(wmat.T) + bias.data
    out = out.reshape(n_batch, out_h, out_w, c_out).transpose(0, 3, 1, 2)

    def rule(gout):
        gflat = gout.transpose(0, 2, 3, 1).reshape(-1, c_out)
        gweight = gflat.T.dot(cols).reshape(weight.shape)
        gbias = gflat.sum(axis=0)
        gcols = gflat.dot(wmat).reshape(n_batch, out_h, out_w,
                                        c_in, kernel, kernel)
        gpadded = np.zeros_like(padded)
        for i in range(kernel):
            for j in range(kernel):
                gpadded[:, :,
                        i:i + stride * out_h:stride,
                        j:j + stride * out_w:stride] += \
                    gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        ginputs = gpadded[:, :, padding:padding + height,
                          padding:padding + width]
        return (ginputs, gweight, gbias)
    return make_result('conv2d', out, (inputs, weight, bias), rule)


# ---------------------------------------------------------------------
# normalisation and activations
# ---------------------------------------------------------------------

def default_groups(channels, preferred=8):
    """
    The group count for GroupNorm over `channels`: `preferred` when it
    divides the channel count, else the largest divisor below it
    """
    groups = min(preferred, channels)
    while channels % groups:
        groups -= 1
    return groups


def group_norm(inputs, groups, gamma, beta, eps=GROUP_NORM_EPS):
    """
    Group normalisation: each (sample, group of channels) is normalised
    to zero mean and unit variance, then scaled and shifted per channel.
    """
    inputs, gamma, beta = as_tensor(inputs), as_tensor(gamma), \
        as_tensor(beta)
    check(inputs.ndim == 4, "group_norm input must be NCHW, got %s",
          inputs.shape)
    n_batch, channels, height, width = inputs.shape
    check(groups > 0 and channels % groups == 0,
          "group_norm: %d channels not divisible into %d groups",
          channels, groups)
    check(eps > 0, "group_norm eps must be positive")
    check(gamma.shape == (channels,) and beta.shape == (channels,),
          "group_norm affine parameters must have shape (%d,)", channels)

    grouped = inputs.data.reshape(n_batch, groups, -1)
    mu = grouped.mean(axis=2, keepdims=True)
    centred = grouped - mu
    var = (centred * centred).mean(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (centred * inv_std).reshape(inputs.shape)
    scale = gamma.data.reshape(1, channels, 1, 1)
    out = xhat * scale + beta.data.reshape(1, channels, 1, 1)

    def rule(gout):
        ggamma = (gout * xhat).sum(axis=(0, 2, 3))
        gbeta = gout.sum(axis=(0, 2, 3))
        gxhat = (gout * scale).reshape(n_batch, groups, -1)
        xhat_g = xhat.reshape(n_batch, groups, -1)
        ginputs = inv_std * (gxhat
                             - gxhat.mean(axis=2, keepdims=True)
                             - xhat_g * (gxhat * xhat_g).mean(axis=2,
                                                              keepdims=True))
        return (ginputs.reshape(inputs.shape), ggamma, gbeta)
    return make_result('group_norm', out, (inputs, gamma, beta), rule)


def swish(inputs):
    "x * sigmoid(x), elementwise"
    inputs = as_tensor(inputs)
    sig = expit(inputs.data)

    def rule(gout):
        return (gout * (sig + inputs.data * sig * (1.0 - sig)),)
    return make_result('swish', inputs.data * sig, (inputs,), rule)


def softmax(inputs, axis=-1):
    "softmax along one axis, shifted by the max for stability"
    inputs = as_tensor(inputs)
    shifted = inputs.data - inputs.data.max(axis=axis, keepdims=True)
    expd = np.exp(shifted)
    out = expd / expd.sum(axis=axis, keepdims=True)

    def rule(gout):
        inner = (gout * out).sum(axis=axis, keepdims=True)
        return (out * (gout - inner),)
    return make_result('softmax', out, (inputs,), rule)


def linear(inputs, weight, bias):
    """
    Affine map of the last axis: inputs [N, in] . weight[out, in]^T + bias
    """
    inputs, weight, bias = as_tensor(inputs), as_tensor(weight), \
        as_tensor(bias)
    check(inputs.ndim == 2 and inputs.shape[1] == weight.shape[1],
          "linear: input %s does not match weight %s",
          inputs.shape, weight.shape)
    out = inputs.data.dot(weight.data.T) + bias.data

    def rule(gout):
        return (gout.dot(weight.data), gout.T.dot(inputs.data),
                gout.sum(axis=0))
    return make_result('linear', out, (inputs, weight, bias), rule)


# ---------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------

def nearest_upsample2x(inputs):
    "replicate each pixel into a 2x2 block"
    inputs = as_tensor(inputs)
    check(inputs.ndim == 4, "upsample input must be NCHW, got %s",
          inputs.shape)
    n_batch, channels, height, width = inputs.shape
    out = inputs.data.repeat(2, axis=2).repeat(2, axis=3)

    def rule(gout):
        blocks = gout.reshape(n_batch, channels, height, 2, width, 2)
        return (blocks.sum(axis=(3, 5)),)
    return make_result('upsample', out, (inputs,), rule)


# ---------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------

AttentionWeights = namedtuple('AttentionWeights',
                              'wq bq wk bk wv bv wo bo')
"""
1x1 convolution weights and biases for the query, key, value and output
projections of a single head attention
"""


def _flatten_positions(tensor):
    ":: [N, C, H, W] -> [N, H*W, C]"
    n_batch, channels = tensor.shape[:2]
    return transpose(reshape(tensor, (n_batch, channels, -1)), (0, 2, 1))


def attention(query_src, key_value_src, weights, return_attention=False):
    """
    Single head dot-product attention with a residual connection.

    Queries come from `query_src`, keys and values from `key_value_src`
    (pass the same tensor twice for self-attention).  Every spatial
    position of the query source attends over every spatial position of
    the key/value source.

    Parameters
    ----------
    query_src : Tensor [N, C, H, W]
    key_value_src : Tensor [N, C', H', W']
    weights : AttentionWeights
        1x1 projections; queries and keys must project to the same
        channel count, and the output projection must map back to C.
    return_attention : bool
        also return the softmax matrix [N, H*W, H'*W']

    Returns
    -------
    Tensor [N, C, H, W]
        query_src + out_proj(softmax(Q K^T / sqrt(d)) V)
    """
    query_src, key_value_src = as_tensor(query_src), as_tensor(key_value_src)
    check(query_src.ndim == 4 and key_value_src.ndim == 4,
          "attention inputs must be NCHW")
    check(query_src.shape[0] == key_value_src.shape[0],
          "attention batch sizes differ: %d vs %d",
          query_src.shape[0], key_value_src.shape[0])
    wq, bq, wk, bk, wv, bv, wo, bo = [as_tensor(w) for w in weights]
    check(wq.shape[1] == query_src.shape[1],
          "attention query projection expects %d channels, got %d",
          wq.shape[1], query_src.shape[1])
    check(wk.shape[1] == key_value_src.shape[1] and
          wv.shape[1] == key_value_src.shape[1],
          "attention key/value projections expect %d channels, got %d",
          wk.shape[1], key_value_src.shape[1])
    check(wq.shape[0] == wk.shape[0],
          "attention channel mismatch after projection: %d vs %d",
          wq.shape[0], wk.shape[0])
    check(wo.shape[:2] == (query_src.shape[1], wv.shape[0]),
          "attention output projection %s does not map back to %d channels",
          wo.shape, query_src.shape[1])

    n_batch, channels, height, width = query_src.shape
    dim = wq.shape[0]
    query = _flatten_positions(conv2d(query_src, wq, bq))
    key = reshape(conv2d(key_value_src, wk, bk), (n_batch, dim, -1))
    value = _flatten_positions(conv2d(key_value_src, wv, bv))
    logits = mul(matmul(query, key), 1.0 / np.sqrt(dim))
    attn = softmax(logits, axis=-1)
    attended = matmul(attn, value)
    attended = reshape(transpose(attended, (0, 2, 1)),
                       (n_batch, wv.shape[0], height, width))
    out = add(query_src, conv2d(attended, wo, bo))
    if return_attention:
        return out, attn
    return out

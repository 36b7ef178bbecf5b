"""
Dense tensors, reverse-mode automatic differentiation, the neural
operators used by the networks, and the Adam optimizer.
"""

from .tensor import (Tensor, GradientTape, backward, concat, matmul,
                     precision, as_tensor)
from .ops import (AttentionWeights, attention, conv2d, default_groups,
                  group_norm, linear, nearest_upsample2x, softmax, swish)
from .optim import AdamState, adam_step, zero_grads

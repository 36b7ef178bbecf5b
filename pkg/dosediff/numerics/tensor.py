# License: BSD3

"""
Dense tensors with reverse-mode automatic differentiation.

A `Tensor` wraps a numpy array.  Operations are recorded on the active
`GradientTape` (if any) whenever one of their inputs requires a
gradient; `GradientTape.backward` then replays the recorded operations
in reverse order.  Outside of a tape nothing is recorded, which is what
we want for inference.

Each recorded operation keeps a backward rule: a function from the
gradient of the output to a tuple of gradients for the inputs (`None`
for inputs that do not need one).
"""

from collections import namedtuple
from contextlib import contextmanager
import threading

import numpy as np

from ..internalutil import check

_STATE = threading.local()

DEFAULT_DTYPE = np.float32


def default_dtype():
    "dtype of freshly created tensors (float32 unless overridden)"
    return getattr(_STATE, 'dtype', DEFAULT_DTYPE)


@contextmanager
def precision(dtype):
    """
    Temporarily change the dtype of new tensors, eg. to float64 for
    finite difference checks
    """
    old = default_dtype()
    _STATE.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _STATE.dtype = old


def _tape_stack():
    "tapes active in this thread, innermost last"
    if not hasattr(_STATE, 'tapes'):
        _STATE.tapes = []
    return _STATE.tapes


def current_tape():
    "the innermost active tape in this thread, or None"
    stack = _tape_stack()
    return stack[-1] if stack else None


Operation = namedtuple('Operation', 'name output inputs rule')


class GradientTape(object):
    """
    Ordered record of differentiable operations.

    Use as a context manager ::

        with GradientTape() as tape:
            loss = ...
        tape.backward(loss)

    A tape belongs to the thread that entered it; do not share one
    across concurrent computations.
    """
    def __init__(self):
        self.operations = []

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc):
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()
        return False

    def record(self, name, output, inputs, rule):
        "append an operation; the output becomes a non-leaf of this tape"
        output.requires_grad = True
        output._tape = self
        self.operations.append(Operation(name, output, inputs, rule))

    def leaves(self):
        """
        Tensors that require a gradient but were not produced by an
        operation on this tape, in order of first use
        """
        seen = {}
        for oper in self.operations:
            for inp in oper.inputs:
                if inp.requires_grad and inp._tape is not self:
                    seen.setdefault(id(inp), inp)
        return list(seen.values())

    def backward(self, loss, params=None):
        """
        Set `grad` on every leaf to the derivative of the (scalar) loss.

        Leaves that the loss does not depend on get a zero gradient.
        So do the tensors in `params`, if given, which do not appear on
        the tape at all.  Gradients are assigned, not accumulated.
        """
        check(loss.size == 1,
              "backward needs a scalar loss, got shape %s", loss.shape)
        check(loss._tape is self,
              "loss was not produced by operations on this tape")
        grads = {id(loss): np.ones_like(loss.data)}
        for oper in reversed(self.operations):
            gout = grads.pop(id(oper.output), None)
            if gout is None:
                continue
            gins = oper.rule(gout)
            for inp, gin in zip(oper.inputs, gins):
                if gin is None or not inp.requires_grad:
                    continue
                key = id(inp)
                if key in grads:
                    grads[key] = grads[key] + gin
                else:
                    grads[key] = gin
        leaves = self.leaves()
        for param in params or []:
            if param.requires_grad and param._tape is not self:
                leaves.append(param)
        for leaf in leaves:
            grad = grads.get(id(leaf))
            if grad is None:
                grad = np.zeros_like(leaf.data)
            leaf.grad = np.asarray(grad, dtype=leaf.data.dtype)\
                .reshape(leaf.shape)

    def reset(self):
        "forget everything recorded so far"
        self.operations = []


def backward(loss, params=None):
    """
    Backpropagate from a scalar loss through the tape that recorded it.

    See `GradientTape.backward`
    """
    check(isinstance(loss, Tensor), "loss must be a Tensor")
    check(loss.size == 1,
          "backward needs a scalar loss, got shape %s", loss.shape)
    check(loss._tape is not None,
          "loss was not produced by recorded operations")
    loss._tape.backward(loss, params=params)


class Tensor(object):
    """
    Dense array of floats, optionally taking part in gradient tapes.

    Parameters
    ----------
    data : array-like
        Values; converted to a C-contiguous array of the default dtype
        (float32).
    requires_grad : bool
        Leaves with this set get a `grad` after `backward`.
    """
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = np.asarray(data, dtype=dtype or default_dtype(), order='C')
        self.requires_grad = requires_grad
        self.grad = None
        self._tape = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        "the underlying array (not a copy)"
        return self.data

    def item(self):
        check(self.size == 1, "item() on a tensor of shape %s", self.shape)
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def detach(self):
        "same values, cut off from any tape"
        return Tensor(self.data)

    def __repr__(self):
        return "Tensor(shape=%s, requires_grad=%s)" % (self.shape,
                                                       self.requires_grad)

    # arithmetic -----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def abs(self):
        return tabs(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


def as_tensor(value):
    "wrap constants (numbers, arrays) as non-differentiable tensors"
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def make_result(name, data, inputs, rule):
    """
    Wrap the result of an operation, recording it on the active tape if
    any input requires a gradient
    """
    out = Tensor(data)
    tape = current_tape()
    if tape is not None and any(inp.requires_grad for inp in inputs):
        tape.record(name, out, inputs, rule)
    return out


def unbroadcast(grad, shape):
    "sum a broadcast gradient back down to `shape`"
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------------
# elementwise algebra
# ---------------------------------------------------------------------

def add(left, right):
    left, right = as_tensor(left), as_tensor(right)

    def rule(gout):
        return (unbroadcast(gout, left.shape), unbroadcast(gout, right.shape))
    return make_result('add', left.data + right.data, (left, right), rule)


def sub(left, right):
    left, right = as_tensor(left), as_tensor(right)

    def rule(gout):
        return (unbroadcast(gout, left.shape),
                unbroadcast(-gout, right.shape))
    return make_result('sub', left.data - right.data, (left, right), rule)


def mul(left, right):
    left, right = as_tensor(left), as_tensor(right)

    def rule(gout):
        return (unbroadcast(gout * right.data, left.shape),
                unbroadcast(gout * left.data, right.shape))
    return make_result('mul', left.data * right.data, (left, right), rule)


def div(left, right):
    left, right = as_tensor(left), as_tensor(right)

    def rule(gout):
        return (unbroadcast(gout / right.data, left.shape),
                unbroadcast(-gout * left.data / (right.data * right.data),
                            right.shape))
    return make_result('div', left.data / right.data, (left, right), rule)


def tabs(tensor):
    "elementwise absolute value (subgradient 0 at 0)"
    def rule(gout):
        return (gout * np.sign(tensor.data),)
    return make_result('abs', np.abs(tensor.data), (tensor,), rule)


# ---------------------------------------------------------------------
# reductions and shape plumbing
# ---------------------------------------------------------------------

def _normalise_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def tsum(tensor, axis=None, keepdims=False):
    axes = _normalise_axes(axis, tensor.ndim)
    result = tensor.data.sum(axis=axes, keepdims=keepdims)

    def rule(gout):
        if not keepdims:
            gout = np.expand_dims(gout, axes)
        return (np.broadcast_to(gout, tensor.shape).copy(),)
    return make_result('sum', result, (tensor,), rule)


def mean(tensor, axis=None, keepdims=False):
    axes = _normalise_axes(axis, tensor.ndim)
    count = 1
    for axis_ in axes:
        count *= tensor.shape[axis_]
    return mul(tsum(tensor, axis=axes, keepdims=keepdims), 1.0 / count)


def reshape(tensor, shape):
    def rule(gout):
        return (gout.reshape(tensor.shape),)
    return make_result('reshape', tensor.data.reshape(shape), (tensor,), rule)


def transpose(tensor, axes):
    inverse = np.argsort(axes)

    def rule(gout):
        return (gout.transpose(inverse),)
    return make_result('transpose', tensor.data.transpose(axes), (tensor,),
                       rule)


def concat(tensors, axis=0):
    "join tensors along an existing axis"
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def rule(gout):
        return tuple(np.take(gout, range(lo, hi), axis=axis)
                     for lo, hi in zip(bounds[:-1], bounds[1:]))
    return make_result('concat',
                       np.concatenate([t.data for t in tensors], axis=axis),
                       tuple(tensors), rule)


def matmul(left, right):
    """
    Matrix product over the last two axes; leading (batch) axes must
    agree exactly
    """
    left, right = as_tensor(left), as_tensor(right)
    check(left.shape[:-2] == right.shape[:-2],
          "matmul batch shapes differ: %s vs %s", left.shape, right.shape)
    check(left.shape[-1] == right.shape[-2],
          "matmul inner dimensions differ: %s vs %s", left.shape, right.shape)

    def rule(gout):
        return (np.matmul(gout, np.swapaxes(right.data, -1, -2)),
                np.matmul(np.swapaxes(left.data, -1, -2), gout))
    return make_result('matmul', np.matmul(left.data, right.data),
                       (left, right), rule)

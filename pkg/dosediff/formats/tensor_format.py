# License: BSD3

"""
The tensor file format (`.ddtf`): a small header followed by the values
as little-endian 32-bit floats in row-major order ::

    bytes   content
    4       magic "DDTF"
    4       format version (u32, little-endian)
    4       rank (u32)
    4*rank  dimensions (u32 each)
    4*prod  values (IEEE-754 float32, little-endian)
"""

import struct

import numpy as np

from ..internalutil import DosediffError

MAGIC = b'DDTF'
VERSION = 1

_U32 = struct.Struct('<I')
_HEADER = struct.Struct('<4sII')
_VALUE_DTYPE = np.dtype('<f4')


class TensorFormatError(DosediffError):
    """
    A tensor or checkpoint file could not be read
    """
    pass


class BadMagicError(TensorFormatError):
    "the file does not start with the expected magic bytes"
    pass


class VersionMismatchError(TensorFormatError):
    "the file was written with a format version we do not read"
    pass


class TruncatedFileError(TensorFormatError):
    "the file ends before its header says it should"
    pass


def read_u32(buf, offset, what='header'):
    ":: (bytes, Int) -> (Int, Int)"
    if offset + _U32.size > len(buf):
        raise TruncatedFileError("truncated %s at byte %d" % (what, offset))
    return _U32.unpack_from(buf, offset)[0], offset + _U32.size


def check_magic(found, expected):
    "raise `BadMagicError` on a mismatch"
    if found != expected:
        raise BadMagicError("bad magic %r (expected %r)" % (found, expected))


def check_version(found, expected=VERSION):
    "raise `VersionMismatchError` on a mismatch"
    if found != expected:
        raise VersionMismatchError("format version %d, this dosediff reads "
                                   "version %d" % (found, expected))


def encode_tensor(array):
    """
    The bytes of a tensor file for an array (converted to float32)

    :rtype: bytes
    """
    values = np.asarray(array, dtype=_VALUE_DTYPE, order='C')
    header = _HEADER.pack(MAGIC, VERSION, values.ndim)
    dims = struct.pack('<%dI' % values.ndim, *values.shape)
    return header + dims + values.tobytes()


def decode_tensor(buf, offset=0):
    """
    Read a tensor from `buf` starting at `offset`.

    Returns
    -------
    array : float32 ndarray
    offset : int
        where the tensor ended

    Raises
    ------
    BadMagicError, VersionMismatchError, TruncatedFileError
    """
    if offset + _HEADER.size > len(buf):
        raise TruncatedFileError("truncated tensor header at byte %d"
                                 % offset)
    magic, version, rank = _HEADER.unpack_from(buf, offset)
    check_magic(magic, MAGIC)
    check_version(version)
    offset += _HEADER.size
    shape = []
    for _ in range(rank):
        dim, offset = read_u32(buf, offset, 'tensor dimensions')
        shape.append(dim)
    n_bytes = _VALUE_DTYPE.itemsize * int(np.prod(shape, dtype=np.int64))
    if offset + n_bytes > len(buf):
        raise TruncatedFileError(
            "tensor of shape %s needs %d bytes of values, only %d left"
            % (tuple(shape), n_bytes, len(buf) - offset))
    values = np.frombuffer(buf, dtype=_VALUE_DTYPE, count=n_bytes // 4,
                           offset=offset)
    array = values.astype(np.float32).reshape(shape)
    return array, offset + n_bytes


def write_tensor(path, array):
    "save an array as a tensor file"
    with open(path, 'wb') as stream:
        stream.write(encode_tensor(array))


def read_tensor(path):
    """
    Load a tensor file

    Raises
    ------
    TensorFormatError
        on bad magic, version or length (including trailing bytes)
    """
    with open(path, 'rb') as stream:
        buf = stream.read()
    array, end = decode_tensor(buf)
    if end != len(buf):
        raise TensorFormatError("%s: %d unexpected bytes after the tensor"
                                % (path, len(buf) - end))
    return array

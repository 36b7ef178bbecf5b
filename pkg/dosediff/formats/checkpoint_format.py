# License: BSD3

"""
Model checkpoints (`.ddpx`): the named parameters of a model ::

    bytes   content
    4       magic "DDPX"
    4       format version (u32, little-endian)
    32      SHA-256 digest of the architecture settings
    4       entry count (u32)
    then per entry:
    2       name length in bytes (u16)
    n       name (UTF-8)
    ...     the parameter, as a complete tensor file (see tensor_format)

The run configuration goes next to the checkpoint, in the same path
with `.json` appended, so that a checkpoint can be loaded on its own.
"""

from collections import OrderedDict
import json
import logging
import struct

from ..internalutil import DosediffError
from ..networks.model import build_for_kind, kind_of_names
from ..util import canonical_json
from .config import ConfigError, RunConfig
from .layout import mk_parent_dirs
from .tensor_format import (TruncatedFileError, check_magic, check_version,
                            decode_tensor, encode_tensor, read_u32)

logger = logging.getLogger(__name__)

MAGIC = b'DDPX'
VERSION = 1
DIGEST_SIZE = 32

_U16 = struct.Struct('<H')


class DuplicateNameError(DosediffError):
    "two checkpoint entries share a name"
    pass


class DigestMismatchError(DosediffError):
    """
    The checkpoint was written for a different architecture than the
    configuration it is loaded under
    """
    pass


def sidecar_path(path):
    "where the configuration of a checkpoint lives"
    return path + '.json'


def encode_checkpoint(entries, digest):
    """
    Bytes of a checkpoint file.

    Parameters
    ----------
    entries : [(string, array)]
    digest : bytes
        32 byte architecture digest

    Raises
    ------
    DuplicateNameError
    """
    if len(digest) != DIGEST_SIZE:
        raise DosediffError("architecture digest must have %d bytes"
                            % DIGEST_SIZE)
    seen = set()
    chunks = [MAGIC, struct.pack('<I', VERSION), digest,
              struct.pack('<I', len(entries))]
    for name, array in entries:
        if name in seen:
            raise DuplicateNameError("duplicate parameter name %s" % name)
        seen.add(name)
        raw_name = name.encode('utf-8')
        chunks.append(_U16.pack(len(raw_name)))
        chunks.append(raw_name)
        chunks.append(encode_tensor(array))
    return b''.join(chunks)


def decode_checkpoint(buf):
    """
    Parse a checkpoint file.

    Returns
    -------
    digest : bytes
    entries : OrderedDict(string, float32 ndarray)

    Raises
    ------
    BadMagicError, VersionMismatchError, TruncatedFileError,
    DuplicateNameError
    """
    if len(buf) < len(MAGIC):
        raise TruncatedFileError("checkpoint shorter than its magic")
    check_magic(bytes(buf[:len(MAGIC)]), MAGIC)
    version, offset = read_u32(buf, len(MAGIC))
    check_version(version, VERSION)
    if offset + DIGEST_SIZE > len(buf):
        raise TruncatedFileError("truncated checkpoint digest")
    digest = bytes(buf[offset:offset + DIGEST_SIZE])
    count, offset = read_u32(buf, offset + DIGEST_SIZE, 'entry count')
    entries = OrderedDict()
    for _ in range(count):
        if offset + _U16.size > len(buf):
            raise TruncatedFileError("truncated entry at byte %d" % offset)
        length = _U16.unpack_from(buf, offset)[0]
        offset += _U16.size
        if offset + length > len(buf):
            raise TruncatedFileError("truncated entry name at byte %d"
                                     % offset)
        name = bytes(buf[offset:offset + length]).decode('utf-8')
        offset += length
        if name in entries:
            raise DuplicateNameError("duplicate parameter name %s" % name)
        entries[name], offset = decode_tensor(buf, offset)
    if offset != len(buf):
        raise TruncatedFileError("%d unexpected bytes after the last entry"
                                 % (len(buf) - offset))
    return digest, entries


def save_checkpoint(model, path, config):
    """
    Write the parameters of a model, and its configuration next to them
    """
    entries = list(model.state_dict().items())
    mk_parent_dirs(path)
    with open(path, 'wb') as stream:
        stream.write(encode_checkpoint(entries,
                                       config.architecture_digest()))
    with open(sidecar_path(path), 'w', encoding='utf-8') as stream:
        stream.write(canonical_json({'kind': model.kind,
                                     'config': config.without_paths()
                                     .to_json()}))
    logger.debug("saved %d parameters to %s", len(entries), path)


def read_sidecar_config(path):
    """
    The configuration saved with a checkpoint

    :rtype: RunConfig
    """
    sidecar = sidecar_path(path)
    try:
        with open(sidecar, encoding='utf-8') as stream:
            obj = json.load(stream)
    except (IOError, OSError) as oops:
        raise ConfigError("no configuration for checkpoint %s: %s"
                          % (path, oops))
    except ValueError as oops:
        raise ConfigError("%s is not valid JSON: %s" % (sidecar, oops))
    return RunConfig.from_json(obj.get('config', {}), source=sidecar)


def load_checkpoint(path, config=None):
    """
    Rebuild a model from a checkpoint.

    Parameters
    ----------
    path : string
    config : RunConfig, optional
        configuration to build the model under (default: the one saved
        with the checkpoint); its architecture digest must match

    Returns
    -------
    model : DiffusionModel, BaselineModel or EncoderModel
        depending on the parameter names
    config : RunConfig

    Raises
    ------
    TensorFormatError, DuplicateNameError, DigestMismatchError,
    ConfigError
        nothing is built unless the whole file is valid
    """
    with open(path, 'rb') as stream:
        buf = stream.read()
    digest, entries = decode_checkpoint(buf)
    if config is None:
        config = read_sidecar_config(path)
    if digest != config.architecture_digest():
        raise DigestMismatchError(
            "%s was written for another architecture (widths, embedding, "
            "conditioning or schedule differ from the configuration)" % path)
    model = build_for_kind(kind_of_names(list(entries)), config)
    model.load_state_dict(entries)
    logger.debug("loaded %s model from %s", model.kind, path)
    return model, config

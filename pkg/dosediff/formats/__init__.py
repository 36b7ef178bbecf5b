"""
File formats (tensors, checkpoints, run configurations, reports), the
layout of dataset and run directories, and DVH plots.
"""

from .tensor_format import (BadMagicError, TensorFormatError,
                            TruncatedFileError, VersionMismatchError,
                            decode_tensor, encode_tensor, read_tensor,
                            write_tensor)
from .config import ConfigError, RunConfig
from .checkpoint_format import (DigestMismatchError, DuplicateNameError,
                                decode_checkpoint, encode_checkpoint,
                                load_checkpoint, save_checkpoint)
from .layout import DatasetError, read_case, write_case
from .plot import plot_dvh

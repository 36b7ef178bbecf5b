# License: BSD3

"""
Run configuration: a flat JSON document of key/value pairs.

Defaults are the desk-scale settings (64x64 phantoms, 200 diffusion
steps, 16/4/8 cases); `RunConfig.full_scale` gives the published
training settings.
"""

from dataclasses import asdict, dataclass, fields, replace
import hashlib
import json
import os

from ..internalutil import DosediffError
from ..metrics.dose import HI_DIVISORS
from ..networks.model import CONDITIONING_MODES
from ..util import canonical_json

# what the network weights and the meaning of their outputs depend on
ARCHITECTURE_KEYS = ('widths', 'emb_dim', 'n_oars', 'conditioning', 'T',
                     'beta_start', 'beta_end', 'dose_max')

DOSE_REGIONS = ('ptv', 'body')


class ConfigError(DosediffError):
    """
    Invalid configuration: unknown keys, bad values, missing paths
    """
    pass


@dataclass(frozen=True)
class RunConfig(object):
    """
    Everything a run depends on besides the data itself
    """
    # phantoms
    size: int = 64
    n_beams: int = 9
    n_cases: int = 28
    split_fractions: tuple = (16 / 28.0, 4 / 28.0, 8 / 28.0)
    # diffusion
    T: int = 200
    beta_start: float = 1e-2
    beta_end: float = 1e-4
    dose_max: float = 2.0
    # networks
    widths: tuple = (32, 64, 128, 128, 256, 256)
    emb_dim: int = 32
    n_oars: int = 4
    conditioning: str = 'fusion'
    # optimisation
    lr: float = 5e-4
    lr_drop_epoch: int = -1
    lr_dropped: float = 1e-4
    batch_size: int = 8
    epochs: int = 300
    pretrain_epochs: int = 100
    patience: int = 0
    checkpoint_every: int = 50
    seed: int = 0
    # evaluation
    dvh_bins: int = 100
    hi_divisor: str = 'd50'
    dose_region: str = 'ptv'
    # paths
    data_dir: str = 'data'
    out_dir: str = 'runs'

    def __post_init__(self):
        for name in ('widths', 'split_fractions'):
            value = getattr(self, name)
            if isinstance(value, list):
                object.__setattr__(self, name, tuple(value))
        self.validate()

    @classmethod
    def full_scale(cls, **kwargs):
        """
        The published settings: 256x256 images, 1000 steps, batch 16,
        1500 epochs with the learning rate halved after epoch 1200, and
        130 cases split 98/10/22
        """
        settings = dict(size=256, T=1000, batch_size=16, epochs=1500,
                        lr=1e-4, lr_drop_epoch=1200, lr_dropped=5e-5,
                        n_cases=130,
                        split_fractions=(98 / 130.0, 10 / 130.0,
                                         22 / 130.0))
        settings.update(kwargs)
        return cls(**settings)

    # -----------------------------------------------------------------
    # validation
    # -----------------------------------------------------------------

    def _check_types(self):
        for fld in fields(self):
            value = getattr(self, fld.name)
            if fld.type is int:
                good = isinstance(value, int) and not isinstance(value, bool)
            elif fld.type is float:
                good = isinstance(value, (int, float)) and \
                    not isinstance(value, bool)
            elif fld.type is str:
                good = isinstance(value, str)
            else:
                good = isinstance(value, tuple) and \
                    all(isinstance(x, (int, float)) and
                        not isinstance(x, bool) for x in value)
            if not good:
                raise ConfigError("%s: expected %s, got %r"
                                  % (fld.name, fld.type.__name__, value))

    def validate(self):
        """
        Raise `ConfigError` unless the values make sense together
        """
        self._check_types()
        problems = []

        def expect(condition, message):
            if not condition:
                problems.append(message)

        expect(self.size > 0 and self.size % 16 == 0,
               "size must be a positive multiple of 16")
        expect(self.n_beams >= 1, "n_beams must be at least 1")
        expect(self.n_cases >= 1, "n_cases must be at least 1")
        expect(len(self.split_fractions) == 3 and
               all(x >= 0 for x in self.split_fractions) and
               abs(sum(self.split_fractions) - 1.0) <= 1e-9,
               "split_fractions must be 3 non-negative numbers summing to 1")
        expect(self.T >= 1, "T must be at least 1")
        expect(0 < self.beta_start < 1 and 0 < self.beta_end < 1,
               "beta_start and beta_end must lie in (0, 1)")
        expect(self.dose_max > 0, "dose_max must be positive")
        expect(len(self.widths) == 6 and
               all(int(w) == w and w > 0 for w in self.widths),
               "widths must be 6 positive integers")
        expect(self.emb_dim > 0 and self.emb_dim % 2 == 0,
               "emb_dim must be a positive even number")
        expect(self.n_oars >= 1, "n_oars must be at least 1")
        expect(self.conditioning in CONDITIONING_MODES,
               "conditioning must be one of %s" % (CONDITIONING_MODES,))
        expect(self.lr > 0 and self.lr_dropped > 0,
               "learning rates must be positive")
        expect(self.batch_size >= 1, "batch_size must be at least 1")
        for name in ('epochs', 'pretrain_epochs', 'patience',
                     'checkpoint_every'):
            expect(getattr(self, name) >= 0, name + " must not be negative")
        expect(self.dvh_bins >= 2, "dvh_bins must be at least 2")
        expect(self.hi_divisor in HI_DIVISORS,
               "hi_divisor must be one of %s" % (HI_DIVISORS,))
        expect(self.dose_region in DOSE_REGIONS,
               "dose_region must be one of %s" % (DOSE_REGIONS,))
        if problems:
            raise ConfigError('; '.join(problems))

    def require_dir(self, name):
        """
        The directory named by the `name` key; `ConfigError` if it does
        not exist
        """
        path = getattr(self, name)
        if not os.path.isdir(path):
            raise ConfigError("%s: no such directory %s" % (name, path))
        return path

    # -----------------------------------------------------------------
    # derived
    # -----------------------------------------------------------------

    def override(self, **kwargs):
        """
        A copy with the given keys changed (`None` values are ignored,
        so that unset command line flags can be passed through)
        """
        changes = dict((k, v) for k, v in kwargs.items() if v is not None)
        unknown = sorted(set(changes) - set(f.name for f in fields(self)))
        if unknown:
            raise ConfigError("unknown configuration keys: %s"
                              % ', '.join(unknown))
        return replace(self, **changes)

    def without_paths(self):
        """
        A copy with the directory keys back at their defaults, for the
        copies of the configuration we store next to data and
        checkpoints (which then do not depend on where they were
        written)
        """
        return replace(self, data_dir=RunConfig.data_dir,
                       out_dir=RunConfig.out_dir)

    def to_json(self):
        ":: dict of json-able values"
        result = asdict(self)
        for name in ('widths', 'split_fractions'):
            result[name] = list(result[name])
        return result

    def architecture_digest(self):
        """
        SHA-256 of the settings that checkpoints must agree on

        :rtype: bytes (32)
        """
        arch = dict((key, getattr(self, key)) for key in ARCHITECTURE_KEYS)
        arch['widths'] = [int(w) for w in self.widths]
        for key in ('beta_start', 'beta_end', 'dose_max'):
            arch[key] = float(arch[key])
        text = json.dumps(arch, sort_keys=True)
        return hashlib.sha256(text.encode('utf-8')).digest()

    # -----------------------------------------------------------------
    # files
    # -----------------------------------------------------------------

    @classmethod
    def from_json(cls, obj, source='configuration'):
        "build from a json object, rejecting unknown keys"
        if not isinstance(obj, dict):
            raise ConfigError("%s: expected a JSON object" % source)
        known = set(f.name for f in fields(cls))
        unknown = sorted(set(obj) - known)
        if unknown:
            raise ConfigError("%s: unknown keys %s"
                              % (source, ', '.join(unknown)))
        return cls(**obj)

    @classmethod
    def load(cls, path):
        """
        Read a JSON configuration; missing keys take their defaults

        Raises
        ------
        ConfigError
        """
        try:
            with open(path, encoding='utf-8') as stream:
                obj = json.load(stream)
        except (IOError, OSError) as oops:
            raise ConfigError("cannot read configuration %s: %s"
                              % (path, oops))
        except ValueError as oops:
            raise ConfigError("%s is not valid JSON: %s" % (path, oops))
        return cls.from_json(obj, source=path)

    def dump(self, path):
        "write as sorted-key JSON"
        with open(path, 'w', encoding='utf-8') as stream:
            stream.write(canonical_json(self.to_json()))

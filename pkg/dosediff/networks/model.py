# License: BSD3

"""
Model handles tying the networks together, and their construction from
a run configuration.

Parameter names are prefixed by the role of the network they belong to
(`encoder.`, `predictor.`, `baseline.`), which is how checkpoints tell
the model kinds apart.
"""

from ..internalutil import check, seeded_rng
from ..numerics.tensor import as_tensor, concat
from .baseline import BaselineUNet
from .encoder import StructureEncoder
from .layers import Module
from .predictor import NoisePredictor

CONDITIONING_MODES = ('fusion', 'concat')

KIND_DIFFUSION = 'diffusion'
KIND_BASELINE = 'baseline'
KIND_ENCODER = 'encoder'


class DiffusionModel(Module):
    """
    Structure encoder and noise predictor, as used by the diffusion
    training and sampling loops.

    With `conditioning='concat'` there is no structure encoder: the
    structure image is concatenated to the noisy dose map instead.
    """
    kind = KIND_DIFFUSION

    def __init__(self, predictor, encoder=None, conditioning='fusion'):
        check(conditioning in CONDITIONING_MODES,
              "unknown conditioning %r", conditioning)
        check((encoder is not None) == (conditioning == 'fusion'),
              "a structure encoder goes with fusion conditioning only")
        self.encoder = encoder
        self.predictor = predictor
        self._conditioning = conditioning

    @property
    def conditioning(self):
        return self._conditioning

    def condition(self, x):
        """
        What the predictor is conditioned on: the structure features,
        or the structure image itself
        """
        if self.encoder is not None:
            return self.encoder(x)
        return as_tensor(x)

    def predict(self, cond, y_t, gamma):
        ":: cond -> Tensor -> array -> Tensor"
        if self.encoder is not None:
            return self.predictor(cond, y_t, gamma)
        y_t = as_tensor(y_t)
        check(cond.shape[0] == y_t.shape[0] and
              cond.shape[2:] == y_t.shape[2:],
              "structure image %s does not match noisy dose %s",
              cond.shape, y_t.shape)
        return self.predictor(None, concat([y_t, cond], axis=1), gamma)


class BaselineModel(Module):
    "the L1 regression UNet"
    kind = KIND_BASELINE

    def __init__(self, baseline):
        self.baseline = baseline

    def forward(self, x):
        return self.baseline(x)

    predict = forward


class EncoderModel(Module):
    "a pretrained structure encoder on its own"
    kind = KIND_ENCODER

    def __init__(self, encoder):
        self.encoder = encoder


def build_model(config, rng=None):
    """
    Freshly initialised diffusion model for a run configuration (uses
    `n_oars`, `widths`, `emb_dim`, `conditioning` and `seed`)

    :rtype: DiffusionModel
    """
    rng = rng if rng is not None else seeded_rng(config.seed, 0)
    in_channels = 2 + config.n_oars
    if config.conditioning == 'concat':
        predictor = NoisePredictor(1 + in_channels, config.widths,
                                   config.emb_dim, rng, fusion=False)
        return DiffusionModel(predictor, conditioning='concat')
    check(config.conditioning == 'fusion',
          "unknown conditioning %r", config.conditioning)
    encoder = StructureEncoder(in_channels, config.widths, rng)
    predictor = NoisePredictor(1, config.widths, config.emb_dim, rng)
    return DiffusionModel(predictor, encoder=encoder)


def build_baseline(config, rng=None):
    ":: RunConfig -> BaselineModel"
    rng = rng if rng is not None else seeded_rng(config.seed, 0)
    return BaselineModel(BaselineUNet(2 + config.n_oars, config.widths, rng))


def build_encoder(config, rng=None):
    ":: RunConfig -> EncoderModel"
    rng = rng if rng is not None else seeded_rng(config.seed, 0)
    return EncoderModel(StructureEncoder(2 + config.n_oars, config.widths,
                                         rng))


def build_for_kind(kind, config):
    "an initialised model of the given kind, ready to receive weights"
    builders = {KIND_DIFFUSION: build_model,
                KIND_BASELINE: build_baseline,
                KIND_ENCODER: build_encoder}
    check(kind in builders, "unknown model kind %r", kind)
    return builders[kind](config)


def kind_of_names(names):
    """
    The model kind a list of parameter names belongs to, from their
    prefixes
    """
    prefixes = set(name.split('.', 1)[0] for name in names)
    if prefixes == {'baseline'}:
        return KIND_BASELINE
    if prefixes == {'encoder'}:
        return KIND_ENCODER
    check(prefixes and prefixes <= {'encoder', 'predictor'} and
          'predictor' in prefixes,
          "cannot tell the model kind from parameter prefixes %s",
          sorted(prefixes))
    return KIND_DIFFUSION

"""
The networks: structure encoder, noise predictor, baseline UNet, and
the model handles combining them.
"""

from .layers import (AttentionBlock, ConvBlock, Down, Module,
                     NoiseLevelEmbedding, ResBlock, Up)
from .encoder import (MirrorDecoder, StructureEncoder, encode_structure,
                      pretrain_structure_encoder)
from .predictor import NoisePredictor, predict_noise
from .baseline import BaselineUNet, baseline_unet_predict, train_baseline
from .model import (BaselineModel, DiffusionModel, EncoderModel,
                    build_baseline, build_encoder, build_for_kind,
                    build_model, kind_of_names)

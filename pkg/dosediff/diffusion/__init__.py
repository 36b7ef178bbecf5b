"""
Denoising diffusion on dose maps: noise schedules, the forward and
reverse processes, and the training step.
"""

from .schedule import NoiseSchedule, build_schedule
from .process import (DiffusionSample, DoseScaler, forward_sample,
                      forward_step, noise, posterior_mean, predict_dose,
                      reverse_step, sample)
from .training import (DivergenceError, diffusion_loss, train_diffusion,
                       training_step, validation_loss)

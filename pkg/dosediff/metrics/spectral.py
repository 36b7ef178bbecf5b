# License: BSD3

"""
High frequency content of dose maps, which is what regression models
trained with pixelwise losses tend to smooth away
"""

import numpy as np
from scipy.ndimage import gaussian_filter

from ..internalutil import check

# frequencies at or above this radius (cycles per pixel) count as high
HIGH_FREQUENCY_RADIUS = 0.25


def as_image(dose):
    "drop leading singleton axes: [1, H, W] -> [H, W]"
    image = np.asarray(dose, dtype=np.float64)
    while image.ndim > 2 and image.shape[0] == 1:
        image = image[0]
    check(image.ndim == 2, "expected a single 2D dose map, got shape %s",
          np.shape(dose))
    return image


def high_frequency_mask(shape):
    """
    Bins of the unshifted 2D DFT whose radial frequency
    `hypot(f_row, f_col)` is at least `HIGH_FREQUENCY_RADIUS` cycles per
    pixel: the low band is a disk, not a square.
    """
    freq_r = np.fft.fftfreq(shape[0])[:, None]
    freq_c = np.fft.fftfreq(shape[1])[None, :]
    return np.hypot(freq_r, freq_c) >= HIGH_FREQUENCY_RADIUS


def hf_energy_ratio(dose):
    """
    Share of the non-DC spectral energy of a dose map found at high
    frequencies, in [0, 1]; 0 for a constant map
    """
    image = as_image(dose)
    check(min(image.shape) >= 4, "dose map too small for a spectrum: %s",
          image.shape)
    power = np.abs(np.fft.fft2(image)) ** 2
    power[0, 0] = 0.0
    total = power.sum()
    # relative threshold: a constant map leaves rounding noise only
    if total <= 1e-20 * max(1.0, np.sum(image ** 2)) * image.size:
        return 0.0
    return float(power[high_frequency_mask(image.shape)].sum() / total)


def gaussian_blur(dose, sigma=2.0):
    """
    Gaussian blur of a dose map (periodic boundary), same shape as the
    input
    """
    dose = np.asarray(dose, dtype=np.float64)
    image = as_image(dose)
    return gaussian_filter(image, sigma=sigma, mode='wrap').reshape(dose.shape)

# License: BSD3

"""
Analytic dose of a set of parallel beams aimed at the target.

Each beam deposits dose in a band of fixed width around its axis, which
passes through the PTV centroid.  Inside the band a ray is attenuated
exponentially with the length of tissue it crossed since entering the
body.  Band edges are sharp, which is what gives the dose maps their
high frequency content.
"""

from collections import namedtuple

import numpy as np
from scipy.ndimage import map_coordinates

from ..internalutil import check


class BeamSpec(namedtuple('BeamSpec', 'angle width attenuation_mu weight')):
    """
    One beam: direction of travel (radians, 0 = along increasing
    columns, pi/2 = along increasing rows), band width in pixels,
    linear attenuation per pixel and relative intensity
    """
    def __new__(cls, angle, width, attenuation_mu, weight):
        check(width > 0, "beam width must be positive, got %s", width)
        check(attenuation_mu >= 0,
              "attenuation must be non-negative, got %s", attenuation_mu)
        check(weight > 0, "beam weight must be positive, got %s", weight)
        return super(BeamSpec, cls).__new__(cls, float(angle), float(width),
                                            float(attenuation_mu),
                                            float(weight))

    def direction(self):
        ":: (drow, dcol) unit vector"
        return np.sin(self.angle), np.cos(self.angle)

    def to_json(self):
        return dict(self._asdict())


def default_beams(rng, n_beams, size):
    """
    `n_beams` equally spaced directions with some jitter, widths around
    a fifth of the image, attenuation scaled so that the fall-off across
    the body does not depend on the resolution
    """
    check(n_beams >= 1, "at least one beam needed, got %d", n_beams)
    spacing = 2 * np.pi / n_beams
    start = rng.uniform(0, spacing)
    beams = []
    for k in range(n_beams):
        angle = (start + k * spacing
                 + rng.uniform(-0.15, 0.15) * spacing) % (2 * np.pi)
        beams.append(BeamSpec(angle=angle,
                              width=rng.uniform(0.15, 0.25) * size,
                              attenuation_mu=rng.uniform(0.8, 1.6) / size,
                              weight=rng.uniform(0.8, 1.2)))
    return beams


def mask_centroid(mask):
    ":: bool array -> (row, col)"
    rows, cols = np.nonzero(mask)
    return rows.mean(), cols.mean()


def tissue_depth(body, direction):
    """
    For every pixel, the length of body tissue a ray travelling in
    `direction` has crossed to get there (the pixel itself included),
    sampled backwards along the ray in unit steps
    """
    size_r, size_c = body.shape
    rows, cols = np.mgrid[0:size_r, 0:size_c].astype(np.float64)
    drow, dcol = direction
    tissue = body.astype(np.float64)
    depth = np.zeros(body.shape)
    for step in range(int(np.ceil(np.hypot(size_r, size_c))) + 1):
        coords = [rows - step * drow, cols - step * dcol]
        depth += map_coordinates(tissue, coords, order=0, mode='constant',
                                 cval=0.0)
    return depth


def beam_band(shape, centre, beam):
    "pixels whose distance to the beam axis is at most half the width"
    rows, cols = np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)
    drow, dcol = beam.direction()
    lateral = (cols - centre[1]) * (-drow) + (rows - centre[0]) * dcol
    return np.abs(lateral) <= beam.width / 2.0


def analytic_dose(body, ptv, beams, normalize=True):
    """
    Superposed dose of the beams, zero outside the body.

    Parameters
    ----------
    body : bool array [H, W]
    ptv : bool array [H, W]
        beams are aimed at its centroid
    beams : list of BeamSpec
    normalize : bool
        scale so that the mean dose over the PTV is 1

    Returns
    -------
    float32 array [1, H, W]
    """
    body = np.asarray(body, dtype=bool)
    ptv = np.asarray(ptv, dtype=bool)
    check(len(beams) > 0, "at least one beam needed")
    check(ptv.any(), "the PTV mask is empty")
    centre = mask_centroid(ptv)
    dose = np.zeros(body.shape)
    for beam in beams:
        band = beam_band(body.shape, centre, beam)
        if beam.attenuation_mu > 0:
            fall_off = np.exp(-beam.attenuation_mu *
                              tissue_depth(body, beam.direction()))
        else:
            fall_off = 1.0
        dose += beam.weight * fall_off * band
    dose[~body] = 0.0
    if normalize:
        ptv_mean = dose[ptv].mean()
        check(ptv_mean > 0, "no dose reaches the PTV")
        dose /= ptv_mean
    return dose[None].astype(np.float32)

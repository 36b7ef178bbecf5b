# License: BSD3

"""
Elliptical anatomy: a body outline, a target volume and four organs at
risk, placed at random but reproducibly, plus a CT-like texture.
"""

from collections import Counter, OrderedDict, namedtuple

import numpy as np
from scipy.ndimage import gaussian_filter

from ..internalutil import DosediffError, check

# semi-axes are never smaller than this, so that every mask has pixels
MIN_SEMI_AXIS = 1.5

# draws per structure before the whole layout is started over
PLACEMENT_RETRIES = 50

LAYOUT_RETRIES = 200


class PhantomGenerationError(DosediffError):
    """
    Could not place the anatomy within the allowed number of attempts
    """
    pass


class Ellipse(namedtuple('Ellipse', 'cy cx ry rx angle')):
    """
    Ellipse in pixel coordinates: centre (row, column), semi-axes along
    its own vertical and horizontal axes, rotation in radians
    """
    def mask(self, size):
        ":: Int -> bool array [size, size]"
        rows, cols = np.ogrid[0:size, 0:size]
        dy = rows - self.cy
        dx = cols - self.cx
        cos_a, sin_a = np.cos(self.angle), np.sin(self.angle)
        along_x = cos_a * dx + sin_a * dy
        along_y = -sin_a * dx + cos_a * dy
        return (along_x / self.rx) ** 2 + (along_y / self.ry) ** 2 <= 1.0


OrganTemplate = namedtuple('OrganTemplate',
                           'name offset_y offset_x ry rx intensity')
"""
Where an organ sits relative to the body centre (as fractions of the
body semi-axes), its semi-axis ranges (fractions of the image size) and
how it shifts the CT intensity
"""

OAR_TEMPLATES = [
    OrganTemplate('bladder', 0.45, 0.0, (0.06, 0.10), (0.07, 0.11), -0.10),
    OrganTemplate('femoral_head_left', 0.15, -0.62,
                  (0.05, 0.08), (0.05, 0.08), 0.30),
    OrganTemplate('femoral_head_right', 0.15, 0.62,
                  (0.05, 0.08), (0.05, 0.08), 0.30),
    OrganTemplate('small_intestine', -0.50, 0.0,
                  (0.05, 0.09), (0.08, 0.14), -0.05),
]

OAR_NAMES = [template.name for template in OAR_TEMPLATES]

# how far (as a fraction of the body semi-axes) organs stray from their
# template positions
POSITION_JITTER = 0.12

PTV_INTENSITY = 0.05


Anatomy = namedtuple('Anatomy', 'body ptv oars ct ellipses')
"""
Boolean masks (body, ptv, list of OAR masks in `OAR_NAMES` order), the
CT image, and the ellipses they came from (name -> Ellipse)
"""


def _semi_axis(rng, bounds, size):
    return max(MIN_SEMI_AXIS, rng.uniform(*bounds) * size)


def sample_body(rng, size):
    "a wide ellipse close to the image centre"
    centre = size / 2.0 - 0.5
    return Ellipse(cy=centre + rng.uniform(-0.03, 0.03) * size,
                   cx=centre + rng.uniform(-0.03, 0.03) * size,
                   ry=_semi_axis(rng, (0.28, 0.38), size),
                   rx=_semi_axis(rng, (0.38, 0.44), size),
                   angle=rng.uniform(-0.1, 0.1))


def sample_ptv(rng, body, size):
    "a target somewhere in the middle part of the body"
    return Ellipse(cy=body.cy + rng.uniform(-0.2, 0.2) * body.ry,
                   cx=body.cx + rng.uniform(-0.25, 0.25) * body.rx,
                   ry=_semi_axis(rng, (0.06, 0.10), size),
                   rx=_semi_axis(rng, (0.06, 0.10), size),
                   angle=rng.uniform(0, np.pi))


def sample_organ(rng, template, body, size):
    ":: Generator -> OrganTemplate -> Ellipse -> Int -> Ellipse"
    return Ellipse(
        cy=body.cy + (template.offset_y
                      + rng.uniform(-POSITION_JITTER, POSITION_JITTER))
        * body.ry,
        cx=body.cx + (template.offset_x
                      + rng.uniform(-POSITION_JITTER, POSITION_JITTER))
        * body.rx,
        ry=_semi_axis(rng, template.ry, size),
        rx=_semi_axis(rng, template.rx, size),
        angle=rng.uniform(0, np.pi))


def _fits(mask, body, taken):
    "nonempty, inside the body, disjoint from what is already placed"
    return mask.any() and not np.any(mask & ~body) and \
        not np.any(mask & taken)


def _place(draw, body_mask, taken, size):
    "(ellipse, mask), or None if no draw fits"
    for _ in range(PLACEMENT_RETRIES):
        ellipse = draw()
        mask = ellipse.mask(size)
        if _fits(mask, body_mask, taken):
            return ellipse, mask
    return None


def _layout(rng, body, body_mask, size):
    """
    PTV then OARs inside a given body; returns the name of the first
    structure that did not fit if any
    """
    placed = _place(lambda: sample_ptv(rng, body, size), body_mask,
                    np.zeros_like(body_mask), size)
    if placed is None:
        return 'PTV', None
    ptv, ptv_mask = placed
    taken = ptv_mask.copy()
    ellipses = OrderedDict([('body', body), ('ptv', ptv)])
    oars = []
    for template in OAR_TEMPLATES:
        placed = _place(lambda: sample_organ(rng, template, body, size),
                        body_mask, taken, size)
        if placed is None:
            return template.name, None
        ellipses[template.name], mask = placed
        oars.append(mask)
        taken |= mask
    return None, (ptv_mask, oars, ellipses)


def ct_texture(rng, body_mask, intensities, size):
    """
    Smooth random field inside the body, shifted per organ, clipped to
    [0.05, 1]; zero outside the body

    Parameters
    ----------
    intensities : list of (mask, offset)
    """
    field = gaussian_filter(rng.standard_normal((size, size)),
                            sigma=size / 8.0, mode='reflect')
    field = (field - field.mean()) / (field.std() or 1.0)
    ct = 0.55 + 0.08 * field
    for mask, offset in intensities:
        ct[mask] += offset
    ct = np.clip(ct, 0.05, 1.0)
    ct[~body_mask] = 0.0
    return ct


def sample_anatomy(rng, size):
    """
    Body, PTV and the four OARs, with the CT texture.

    Raises
    ------
    PhantomGenerationError
        if some structure cannot be placed inside the body without
        overlapping the others
    """
    check(size >= 16, "phantoms need at least 16 pixels, got %d", size)
    failures = Counter()
    for _ in range(LAYOUT_RETRIES):
        body = sample_body(rng, size)
        body_mask = body.mask(size)
        failed, layout = _layout(rng, body, body_mask, size)
        if layout is not None:
            break
        failures[failed] += 1
    else:
        raise PhantomGenerationError(
            "could not lay out the anatomy in %d attempts (image size %d); "
            "structures that did not fit: %s"
            % (LAYOUT_RETRIES, size, dict(failures)))
    ptv_mask, oars, ellipses = layout
    intensities = [(ptv_mask, PTV_INTENSITY)] + \
        [(mask, template.intensity)
         for mask, template in zip(oars, OAR_TEMPLATES)]
    ct = ct_texture(rng, body_mask, intensities, size)
    return Anatomy(body_mask, ptv_mask, oars, ct, ellipses)

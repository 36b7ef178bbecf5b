"""
Synthetic pelvic phantoms: elliptical anatomy with a PTV and four organs
at risk, and the analytic dose of a fan of attenuated beams aimed at the
target.  Every case is a pure function of its seed.
"""

from .geometry import (Anatomy, Ellipse, OAR_NAMES, PhantomGenerationError,
                       sample_anatomy)
from .beams import BeamSpec, analytic_dose, default_beams
from .generate import (CHANNEL_NAMES, N_OARS, PhantomCase, case_from_json,
                       case_name, case_seed, generate_case, generate_dataset,
                       split_dataset, split_sizes, structure_masks)

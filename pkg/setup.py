"""
dosediff setup: dosediff predicts radiotherapy dose maps with a
conditional denoising diffusion model, and evaluates them
"""

from setuptools import setup, find_packages
import glob
import os

REQS = [
    'numpy >= 1.17',
    'scipy',
    'pandas >= 1.5',
    'tabulate',
    'matplotlib',
    'tqdm',
]


setup(name='dosediff',
      version='0.1',
      packages=find_packages(),
      scripts=[f for f in glob.glob('scripts/*') if not os.path.isdir(f)],
      python_requires='>=3.7',
      install_requires=REQS)

"""
dosediff subcommands
"""

from . import (evaluate,
               gen_data,
               plot_dvh,
               pretrain,
               sample,
               train)

# in pipeline order
SUBCOMMAND_SECTIONS = [
    ('Data', [
        gen_data,
    ]),
    ('Training', [
        pretrain,
        train,
    ]),
    ('Prediction and evaluation', [
        sample,
        evaluate,
        plot_dvh,
    ]),
]

SUBCOMMANDS = []
for descr, section in SUBCOMMAND_SECTIONS:
    SUBCOMMANDS.extend(section)

# License: BSD3

"""
DVH plots as standalone SVG documents
"""

import matplotlib
from matplotlib.figure import Figure

# fixed so that identical curves give byte-identical files
SVG_SETTINGS = {'svg.hashsalt': 'dosediff', 'svg.fonttype': 'none'}

LINE_STYLES = {'pred': '-', 'gt': '--'}


def plot_dvh(curves, path, title=None):
    """
    Draw DVH curves into an SVG file.

    Parameters
    ----------
    curves : [(string, DvhCurve)]
        (source, curve) pairs; the source ('pred' or 'gt') picks the
        line style, the structure name the colour
    path : string
    title : string, optional
    """
    fig = Figure(figsize=(6.4, 4.8))
    axes = fig.add_subplot(1, 1, 1)
    colours = {}
    for source, curve in curves:
        if curve.name not in colours:
            colours[curve.name] = 'C%d' % (len(colours) % 10)
        axes.plot(curve.dose, curve.volume,
                  linestyle=LINE_STYLES.get(source, ':'),
                  color=colours[curve.name],
                  label='%s (%s)' % (curve.name, source))
    axes.set_xlabel('dose (relative to prescription)')
    axes.set_ylabel('volume fraction')
    axes.set_ylim(0, 1.05)
    if title:
        axes.set_title(title)
    if curves:
        axes.legend(loc='upper right', fontsize='small')
    with matplotlib.rc_context(SVG_SETTINGS):
        fig.savefig(path, format='svg', metadata={'Date': None})

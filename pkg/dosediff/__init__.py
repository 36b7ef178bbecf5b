"""
The dosediff library predicts radiotherapy dose distribution maps with a
conditional denoising diffusion model, and evaluates the predictions
with the usual dosimetric metrics.  It has a three-layer structure:

* base layer (tensors, autodiff, optimizer)
* model layer (diffusion process, networks)
* project layer (phantom data, metrics, file formats, command line)

Layers
~~~~~~
The base layer (`dosediff.numerics`) is a small dense tensor library
with reverse-mode automatic differentiation: convolutions, group
normalisation, attention, upsampling and the Adam optimizer.  Nothing
above it touches raw gradients.

The model layer provides

* the diffusion machinery (`dosediff.diffusion`): noise schedule,
  forward noising, the reverse sampling chain and the training step

* the networks (`dosediff.networks`): the structure encoder, the UNet
  noise predictor that fuses its features, and a plain L1 UNet kept
  around as a regression baseline

The project layer deals with the data and the outside world:

* synthetic phantoms with analytic beam doses (`dosediff.phantom`)
* dose metrics, DVH, statistics and reports (`dosediff.metrics`)
* file formats and run configuration (`dosediff.formats`)
* the `dosediff` command line tool (`dosediff.cmd`) ::

                  cmd                          [project layer]
                   |
        +----------+----------+--------+
        |          |          |        |
        v          v          v        v
     phantom    metrics    formats     |
        |                     |        |
        v                     v        v
           diffusion <---- networks             [model layer]
                |              |
                v              v
                   numerics                     [base layer]
"""
# License: BSD3

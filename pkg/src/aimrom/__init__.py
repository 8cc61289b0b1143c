"""Reduced-order modeling of dissipative PDEs via approximate inertial manifolds.

Spectral Galerkin ground truths, analytic and learned closures,
post-processing correction, and data-driven latent coordinates
(diffusion maps, geometric harmonics, autoencoders, POD).
"""

__version__ = "0.1.0"

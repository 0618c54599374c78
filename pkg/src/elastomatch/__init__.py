"""Elastic scattering simulation and dictionary-based scatterer identification.

Two forward solvers (boundary integral for rigid obstacles, volume integral
for penetrable media) feed a two-stage reconstruction: a low-frequency
sampling indicator locates the scatterer, then a regular-frequency
dictionary search picks its shape.
"""

from .material import ElasticMaterial, Polarization, lame_from_engineering

__version__ = "0.1.0"

__all__ = ["ElasticMaterial", "Polarization", "lame_from_engineering", "__version__"]

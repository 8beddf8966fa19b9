"""Spectral control laboratory for Schrodinger equations on tori and rectangles."""

from .lattice import (
    ModeLattice,
    SpectralField,
    LatticeError,
    ParityError,
    make_lattice,
    to_physical,
    to_spectral,
    sobolev_norm,
    free_propagate,
    pointwise_product,
    power_product,
    odd_extend,
    even_extend,
    restrict,
)

__version__ = "0.1.0"

"""dilab: numerical checks of multiplier, smoothing and scattering identities for i u_t - Delta u + V u = 0."""
from .grid import ComplexField, Grid, build_grid
from .potential import sample_potential
from .spectral import assemble_hamiltonian, evolve, perturbed_sobolev_norm

__version__ = "0.1.0"

__all__ = [
    "ComplexField",
    "Grid",
    "build_grid",
    "sample_potential",
    "assemble_hamiltonian",
    "evolve",
    "perturbed_sobolev_norm",
]

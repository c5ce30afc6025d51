"""Landscape functions, effective potentials and exact eigenvalue counts for -Delta + V."""
from .counting import chain_check, coarse_counts, sublevel_volume
from .discretize import DiscreteOperator, Grid, ScalarField, assemble, build_grid
from .landscape import effective_potential, harnack_constant, landscape, solve_landscape
from .potential import (PolynomialPotential, SampledPotential, harmonic, make_potential,
                        maximal_M, maximal_m, simon)
from .spectra import count_sweep, inertia_count, sturm_count
from .verify import run_verify

__version__ = "0.1.0"

"""Simulation of dissipative spin squeezing driven by a squeezed reservoir."""
from .analytic import dark_state, lmg_spectrum, odd_purity, odd_steady_state
from .errors import SpinSqueezeError
from .liouvillian import (HybridParams, Liouvillian, ModelParams, build_full_oracle,
                          build_general_collective, build_hybrid, build_ideal, build_spin_model,
                          build_thermal)
from .measure import purity, spin_moments, squeezing, sy_distribution, wineland
from .solver import evolve, jspace_rate_matrix, spectrum, steady_state
from .spinspace import DickeSpace, dicke_space
from .state import DensityState

__version__ = "0.1.0"

__all__ = [
    "DensityState", "DickeSpace", "HybridParams", "Liouvillian", "ModelParams",
    "SpinSqueezeError", "build_full_oracle", "build_general_collective", "build_hybrid",
    "build_ideal", "build_spin_model", "build_thermal", "dark_state", "dicke_space", "evolve",
    "jspace_rate_matrix", "lmg_spectrum", "odd_purity", "odd_steady_state", "purity",
    "spectrum", "spin_moments", "squeezing", "steady_state", "sy_distribution", "wineland",
]

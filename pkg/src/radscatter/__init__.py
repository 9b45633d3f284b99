"""Numerical toolkit for radial nonlinear Schroedinger and Klein-Gordon equations in the plane."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .grid import RadialField, RadialGrid, h1_norms, make_grid, sample  # noqa: E402
from .nonlinearity import Nonlinearity  # noqa: E402
from .functionals import EvolutionState, ScalingPair, energy, functional_K, mass, static_energy_J, virial_K  # noqa: E402
from .ground_state import GroundState, solve_ground_state, threshold_m  # noqa: E402
from .evolve import EvolveConfig, Trajectory, evolve, linear_propagate  # noqa: E402

"""Vanishing-viscosity laboratory for sheared flow in a periodic channel.

The package builds the matched asymptotic expansion of steady Navier-Stokes
flow on ``T x [0, 1]`` (top wall moving with speed ``alpha + delta f(x)``,
bottom wall at rest), assembles the composite approximation, solves the full
equations by Newton-Krylov and compares the two.
"""

from .composite import CompositeSolution, Cutoff, assemble_composite, residual
from .config import ConfigError, RunConfig, load_config, parse_config
from .euler import EulerCascade, EulerTerm, solve_harmonic_dirichlet
from .hierarchy import ExpansionHierarchy, build_hierarchy, lattice, next_exponent
from .lower import solve_lower_layer
from .ns import ErrorReport, NSState, error_norms, solve_steady_ns, stokes_solve
from .prandtl import batchelor_constant, solve_von_mises
from .problem import Discretisation, ProblemSpec, make_spec
from .strip import Grid1D, StripField

__version__ = "0.1.0"

__all__ = [
    "CompositeSolution", "ConfigError", "Cutoff", "Discretisation", "ErrorReport", "EulerCascade",
    "EulerTerm", "ExpansionHierarchy", "Grid1D", "NSState", "ProblemSpec", "RunConfig", "StripField",
    "assemble_composite", "batchelor_constant", "build_hierarchy", "error_norms", "lattice", "load_config",
    "make_spec", "next_exponent", "parse_config", "residual", "solve_harmonic_dirichlet",
    "solve_lower_layer", "solve_steady_ns", "solve_von_mises", "stokes_solve",
]

"""Layered hydrostatic free-surface flow with paddlewheel forcing, Droop growth and particle light histories."""

from .analytic import AnalyticCase, solve_surface_profile
from .biology import BioParams
from .config import RunConfig, load_config
from .forcing import WheelConfig
from .geometry import GridSpec, build_grid, layer_geometry
from .kinetic import BoundaryCondition, MultilayerSolver, SolverConfig, SolverFailure
from .state import HydroState, PhysParams

__all__ = [
    "AnalyticCase", "BioParams", "BoundaryCondition", "GridSpec", "HydroState",
    "MultilayerSolver", "PhysParams", "RunConfig", "SolverConfig", "SolverFailure",
    "WheelConfig", "build_grid", "layer_geometry", "load_config", "solve_surface_profile",
]

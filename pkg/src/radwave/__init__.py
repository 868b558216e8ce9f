"""Radial finite-difference solver and diagnostics for the 2D defocusing wave equation."""
__version__ = "0.1.0"

from .core import (
    BlowUpError,
    ConfigError,
    ContractError,
    FieldState,
    InitialDataSpec,
    RadialGrid,
    SimConfig,
    make_grid,
    sample_initial_data,
)
from .solver import Trajectory, evolve, step

__all__ = [
    "BlowUpError",
    "ConfigError",
    "ContractError",
    "FieldState",
    "InitialDataSpec",
    "RadialGrid",
    "SimConfig",
    "Trajectory",
    "evolve",
    "make_grid",
    "sample_initial_data",
    "step",
]

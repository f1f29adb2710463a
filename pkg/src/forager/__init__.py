"""Finite-volume simulation of the forager-exploiter taxis system with logistic sources."""

from .grid import Grid, State
from .model import (
    AprioriBounds,
    Constant,
    ExpDecay,
    ModelParams,
    SteadyStates,
    Tabulated,
    apriori_bounds,
    check_theory_conditions,
    stability_regime_check,
    steady_states,
)
from .solver import DiagnosticsPlan, SolverConfig, run, step

__all__ = [
    "AprioriBounds",
    "Constant",
    "DiagnosticsPlan",
    "ExpDecay",
    "Grid",
    "ModelParams",
    "SolverConfig",
    "State",
    "SteadyStates",
    "Tabulated",
    "apriori_bounds",
    "check_theory_conditions",
    "run",
    "stability_regime_check",
    "steady_states",
    "step",
]

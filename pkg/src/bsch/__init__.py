"""Bulk-surface Cahn-Hilliard simulator on a periodic strip.

Modules
-------
potentials   free-energy densities, Yosida regularisation, assumption checks
grid         geometry, discrete operators and field snapshots
model        energy, chemical potentials and step residuals
stepper      energy-stable implicit time stepping
diagnostics  conservation/dissipation/equilibrium readouts
experiments  parameter sweeps and canonical scenarios
cli          ``bsch`` command-line entry point
"""
from .errors import (
    Aborted,
    BschError,
    ConvergenceError,
    DimensionError,
    DomainError,
    InsufficientData,
    KindMismatch,
    LinearBreakdown,
    MissingPrev,
    NewtonDivergence,
    SeparationBreach,
)
from .grid import Grid
from .model import ChemState, EnergyBreakdown, ModelParams, PhaseState, chemical_potentials, energy, residual
from .potentials import Kind, Potential, YosidaApprox
from .stepper import LinearSolver, StepperConfig, StepReport, run, step

__version__ = "0.1.0"

__all__ = [
    "Aborted", "BschError", "ConvergenceError", "DimensionError", "DomainError",
    "InsufficientData", "KindMismatch", "LinearBreakdown", "MissingPrev",
    "NewtonDivergence", "SeparationBreach",
    "Grid", "ChemState", "EnergyBreakdown", "ModelParams", "PhaseState",
    "chemical_potentials", "energy", "residual",
    "Kind", "Potential", "YosidaApprox",
    "LinearSolver", "StepperConfig", "StepReport", "run", "step",
]

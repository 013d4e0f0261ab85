"""Numerical laboratory for the low Mach, inviscid limit of the Navier-Stokes-Fourier system."""

from .thermo import GasModel, ReferenceState, linearization_coefficients, verify_hypotheses
from .fields import Grid
from .nsf import NsfModel, NsfState, ScalingParams
from .harness import ExperimentConfig, load_config, run_single, run_sweep, fit_rate

__version__ = "0.1.0"

__all__ = [
    "GasModel",
    "ReferenceState",
    "linearization_coefficients",
    "verify_hypotheses",
    "Grid",
    "NsfModel",
    "NsfState",
    "ScalingParams",
    "ExperimentConfig",
    "load_config",
    "run_single",
    "run_sweep",
    "fit_rate",
]

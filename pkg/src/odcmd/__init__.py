"""Distributed online mirror descent for composite losses over time-varying networks.

Full-information (``run_odcmd``) and two-point bandit (``run_banodcmd``) variants,
with inexact prox steps, a subgradient baseline, a regret harness and a CLI.
"""

from __future__ import annotations

from .algorithms import (
    AlgorithmConfig,
    RunRecord,
    run_banodcmd,
    run_odcmd,
    run_subgradient_baseline,
    theorem_bounds,
)
from .config import ExperimentConfig, load_preset, validate
from .geometry import (
    ConfigurationError,
    ConstraintSet,
    DomainError,
    ErrorModel,
    MirrorMap,
    ProxConvergenceError,
    Regularizer,
    prox_approx,
    prox_exact,
)
from .harness import average_regret, run_cell, solve_comparator, sweep
from .network import build_schedule, metropolis_weights, verify_connectivity
from .problems import FeasibilityError, LossStream, generate_regression_stream

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig", "ConfigurationError", "ConstraintSet", "DomainError", "ErrorModel",
    "ExperimentConfig", "FeasibilityError", "LossStream", "MirrorMap", "ProxConvergenceError",
    "Regularizer", "RunRecord", "average_regret", "build_schedule", "generate_regression_stream",
    "load_preset", "metropolis_weights", "prox_approx", "prox_exact", "run_banodcmd", "run_cell",
    "run_odcmd", "run_subgradient_baseline", "solve_comparator", "sweep", "theorem_bounds",
    "validate", "verify_connectivity",
]

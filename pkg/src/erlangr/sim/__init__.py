"""Discrete-event simulation of the blocking, holding and closed-ward models."""
from ._backend import BACKEND, run_stationary, run_stationary_python
from .engine import (
    EVENT_NAMES,
    MODEL_CODES,
    OrderingReport,
    SimConfig,
    SimResult,
    VisitStrata,
    binned_trajectories,
    ordering_experiment,
    simulate,
    time_varying_simulate,
)

__all__ = [
    "BACKEND",
    "EVENT_NAMES",
    "MODEL_CODES",
    "OrderingReport",
    "SimConfig",
    "SimResult",
    "VisitStrata",
    "binned_trajectories",
    "ordering_experiment",
    "simulate",
    "time_varying_simulate",
    "run_stationary",
    "run_stationary_python",
]

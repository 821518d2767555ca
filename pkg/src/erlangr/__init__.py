"""Finite-capacity many-server queues with returning customers.

A facility holds at most n patients; s nurses serve needy patients (rate mu),
served patients become content (rate delta) and return needy with probability
p. Three admission disciplines are modeled: blocking (arrivals finding a full
facility are lost), holding (they wait outside in FCFS order), and the closed
ward (the facility is always full). The package provides exact stationary
analysis, many-server diffusion limits, square-root capacity dimensioning,
discrete-event simulation, and time-varying offered-load staffing.
"""
from .blocking import BlockingDistribution, perf_blocking, stationary_blocking
from .dimensioning import (
    DimensioningResult,
    FixedPointSolution,
    dimension_blocking,
    dimension_holding,
    holding_approx,
    solve_alpha,
)
from .errors import (
    DomainError,
    ErlangRError,
    InfeasibleTarget,
    NoConvergence,
    NotStable,
    ScheduleGap,
    SingularSystem,
)
from .model import (
    CapacityPair,
    DerivedLoads,
    ModelParams,
    PerformanceReport,
    QedPair,
    derive_loads,
    invert_capacity,
    qed_capacity,
)
from .mol import (
    ArrivalProfile,
    LoadTrajectory,
    StaffingSchedule,
    integrate_offered_load,
    mol_schedule,
)
from .qbd import (
    HoldingDistribution,
    QbdBlocks,
    RateMatrixG,
    build_qbd_blocks,
    perf_holding,
    rho_max,
    solve_rate_matrix,
    stationary_holding,
)
from .qed import (
    LimitInputs,
    erlang_b_tail,
    gaussian_mix_integral,
    halfin_whitt_delay,
    limits_blocking,
    loss_model_limits,
)
from .sim import (
    OrderingReport,
    SimConfig,
    SimResult,
    VisitStrata,
    ordering_experiment,
    simulate,
    time_varying_simulate,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "ModelParams", "DerivedLoads", "QedPair", "CapacityPair", "PerformanceReport",
    "derive_loads", "qed_capacity", "invert_capacity",
    # errors
    "ErlangRError", "DomainError", "NotStable", "InfeasibleTarget",
    "NoConvergence", "SingularSystem", "ScheduleGap",
    # exact blocking
    "BlockingDistribution", "stationary_blocking", "perf_blocking",
    # holding QBD
    "QbdBlocks", "RateMatrixG", "HoldingDistribution",
    "build_qbd_blocks", "solve_rate_matrix", "stationary_holding",
    "perf_holding", "rho_max",
    # diffusion limits
    "LimitInputs", "limits_blocking", "gaussian_mix_integral",
    "halfin_whitt_delay", "loss_model_limits", "erlang_b_tail",
    # dimensioning
    "FixedPointSolution", "DimensioningResult",
    "solve_alpha", "holding_approx", "dimension_blocking", "dimension_holding",
    # simulation
    "SimConfig", "SimResult", "VisitStrata", "OrderingReport",
    "simulate", "ordering_experiment", "time_varying_simulate",
    # time-varying staffing
    "ArrivalProfile", "LoadTrajectory", "StaffingSchedule",
    "integrate_offered_load", "mol_schedule",
]

"""Drone platform location and trip scheduling toolkit."""
from .core import (
    LONG_RANGE,
    SHORT_RANGE,
    Demand,
    DomainError,
    DroneType,
    FleetSpec,
    Instance,
    InstanceError,
    ParametricCurve,
    Site,
    TabularCurve,
    TimeGrid,
    TwoPeriodConfig,
    eval_disutility,
    mixed_fleet_split,
)
from .instances import (
    ScenarioParams,
    duplicate_sites,
    generate_scenario,
    make_instance,
    read_instance,
    reduce_machine_scheduling,
    write_instance,
)
from .schedule import Schedule, SearchStats, SolveResult, Status, Trip
from .solve import brute_force, relocation_matching, solve_exact, solve_heuristic
from .verify import marginal_benefit, makespan_fraction, recompute_objective, validate

__version__ = "0.1.0"

__all__ = [
    "Demand",
    "DomainError",
    "DroneType",
    "FleetSpec",
    "Instance",
    "InstanceError",
    "LONG_RANGE",
    "ParametricCurve",
    "SHORT_RANGE",
    "ScenarioParams",
    "Schedule",
    "SearchStats",
    "Site",
    "SolveResult",
    "Status",
    "TabularCurve",
    "TimeGrid",
    "Trip",
    "TwoPeriodConfig",
    "brute_force",
    "duplicate_sites",
    "eval_disutility",
    "generate_scenario",
    "make_instance",
    "makespan_fraction",
    "marginal_benefit",
    "mixed_fleet_split",
    "read_instance",
    "recompute_objective",
    "reduce_machine_scheduling",
    "relocation_matching",
    "solve_exact",
    "solve_heuristic",
    "validate",
    "write_instance",
]

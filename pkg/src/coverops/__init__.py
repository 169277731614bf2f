"""Coverage partitioning for agents that only talk to a central base station."""

from .core import (AgentPayload, BaseStationState, MissionParams, additive_subset, base_update,
                   check_state_invariants, coverage_cost, init_state, pareto_certificate,
                   timer_update)
from .errors import (ConfigError, CoverOpsError, GraphError, InitializationError,
                     InvariantViolation, LikelihoodError, NoPathError,
                     PlannerContractViolation, ScheduleError, SizeLimitError)
from .graph import EnvironmentGraph, build_grid, shortest_path_in_subset, subgraph_distance
from .likelihood import AgentTimingView, LikelihoodSchedule, active_region, local_mass
from .sim import SimConfig, SimTrace, compute_metrics, run, schedule_next_comm

__version__ = "0.1.0"

__all__ = [
    "AgentPayload", "AgentTimingView", "BaseStationState", "ConfigError", "CoverOpsError",
    "EnvironmentGraph", "GraphError", "InitializationError", "InvariantViolation",
    "LikelihoodError", "LikelihoodSchedule", "MissionParams", "NoPathError",
    "PlannerContractViolation", "ScheduleError", "SimConfig", "SimTrace", "SizeLimitError",
    "active_region", "additive_subset", "base_update", "build_grid", "check_state_invariants",
    "compute_metrics", "coverage_cost", "init_state", "local_mass", "pareto_certificate",
    "run", "schedule_next_comm", "shortest_path_in_subset", "subgraph_distance",
    "timer_update",
]

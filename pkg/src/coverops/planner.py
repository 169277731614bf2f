"""Agent-side motion: pluggable planners, edge traversal and retreat paths.

An agent sits on a vertex or is in transit along one edge. It only makes
decisions on arrival and when the harness hands it a new horizon. After a
communication that removed its current vertex it ignores the planner and
walks a precomputed shortest path (inside its previous region) back into
its new region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol

import numpy as np

from .core import AgentPayload
from .errors import InvariantViolation, NoPathError, PlannerContractViolation
from .graph import EnvironmentGraph, shortest_path_in_subset
from .likelihood import AgentTimingView, LikelihoodSchedule, local_mass, prohibited_region

PLANNER_NAMES = ("greedy-ergodic", "random-admissible")


class Transit(NamedTuple):
    frm: int
    to: int
    depart: float
    arrive: float


class OccupancyRecord(NamedTuple):
    agent: int
    vertex: int
    enter: float
    exit: float
    in_transit: bool


@dataclass
class MotionState:
    agent: int
    current_vertex: int
    speed: float
    visit_counts: np.ndarray
    transit: Transit | None = None
    mode: str = "normal"
    # remaining retreat walk; head is current_vertex (or the transit target)
    retreat_path: list[int] = field(default_factory=list)
    # region the agent held when a communication caught it mid-edge
    pending_region: frozenset | None = None

    @classmethod
    def start(cls, agent: int, vertex: int, speed: float, n: int) -> "MotionState":
        counts = np.zeros(n, dtype=np.int64)
        counts[vertex] = 1
        return cls(agent, int(vertex), float(speed), counts)

    def occupied(self) -> tuple[int, ...]:
        if self.transit is None:
            return (self.current_vertex,)
        return (self.transit.frm, self.transit.to)


class Planner(Protocol):
    def next_move(self, g: EnvironmentGraph, view: AgentTimingView, motion: MotionState,
                  likelihood: LikelihoodSchedule, t: float) -> int | None: ...


def admissible_neighbors(g: EnvironmentGraph, view: AgentTimingView, vertex: int,
                         t: float) -> list[int]:
    proh = prohibited_region(view, t)
    return [u for u, _ in g.adjacency[vertex] if u in view.region and u not in proh]


def reference_planner_next(g: EnvironmentGraph, view: AgentTimingView, motion: MotionState,
                           likelihood: LikelihoodSchedule, t: float,
                           mode: str = "instantaneous") -> int | None:
    """Neighbour with the best likelihood-per-visit score; lowest id wins ties."""
    best, best_score = None, -1.0
    for u in admissible_neighbors(g, view, motion.current_vertex, t):
        score = local_mass(view, likelihood, u, t, mode) / (1 + motion.visit_counts[u])
        if score > best_score:
            best, best_score = u, score
    return best


@dataclass
class GreedyErgodicPlanner:
    mode: str = "instantaneous"

    def next_move(self, g, view, motion, likelihood, t):
        return reference_planner_next(g, view, motion, likelihood, t, self.mode)


@dataclass
class RandomAdmissiblePlanner:
    rng: np.random.Generator

    def next_move(self, g, view, motion, likelihood, t):
        options = admissible_neighbors(g, view, motion.current_vertex, t)
        if not options:
            return None
        return options[int(self.rng.integers(len(options)))]


@dataclass
class ProhibitionBlindPlanner:
    """Fault-injection planner: roams the whole graph toward the lowest-id neighbour.

    Only useful for exercising the contract check and the collision detector.
    """

    def next_move(self, g, view, motion, likelihood, t):
        nbrs = g.adjacency[motion.current_vertex]
        return nbrs[0][0] if nbrs else None


def make_planner(name: str, rng: np.random.Generator, mode: str = "instantaneous") -> Planner:
    if name == "greedy-ergodic":
        return GreedyErgodicPlanner(mode)
    if name == "random-admissible":
        return RandomAdmissiblePlanner(rng)
    raise ValueError(f"unknown planner {name!r}; choose from {PLANNER_NAMES}")


def check_move(g: EnvironmentGraph, view: AgentTimingView, motion: MotionState, target: int,
               t: float) -> None:
    v = motion.current_vertex
    if not g.has_edge(v, target):
        raise PlannerContractViolation(
            f"agent {motion.agent} at t={t}: {target} is not adjacent to {v}")
    if target not in view.region:
        raise PlannerContractViolation(
            f"agent {motion.agent} at t={t}: {target} lies outside its region")
    if target in prohibited_region(view, t):
        raise PlannerContractViolation(
            f"agent {motion.agent} at t={t}: {target} is prohibited until {view.gate_time}")


def _retreat(g: EnvironmentGraph, motion: MotionState, within: frozenset, into: frozenset,
             t: float) -> None:
    try:
        path = shortest_path_in_subset(g, within, motion.current_vertex, into)
    except NoPathError as exc:
        raise InvariantViolation(
            "coverage-guarantee.3",
            f"agent {motion.agent} at t={t}: no retreat path from {motion.current_vertex} "
            "into its new region") from exc
    motion.mode = "retreat"
    motion.retreat_path = path


def on_communication(g: EnvironmentGraph, motion: MotionState, old_region: frozenset,
                     payload: AgentPayload, t: float) -> MotionState:
    """React to a fresh payload; start a retreat if the agent now stands outside its region."""
    if motion.transit is not None:
        # finish the edge first; the arrival vertex is checked then
        if motion.pending_region is None:
            motion.pending_region = frozenset(old_region)
        return motion
    if motion.mode == "retreat":
        return motion
    if motion.current_vertex not in payload.region:
        _retreat(g, motion, frozenset(old_region), payload.region, t)
    else:
        motion.mode = "normal"
        motion.retreat_path = []
    return motion


@dataclass
class MotionStep:
    records: list[OccupancyRecord]
    arrivals: list[tuple[float, int]]


def _arrive(g, motion: MotionState, view: AgentTimingView, t: float) -> None:
    motion.current_vertex = motion.transit.to
    motion.transit = None
    motion.visit_counts[motion.current_vertex] += 1
    if motion.mode == "retreat":
        motion.retreat_path.pop(0)
        if len(motion.retreat_path) <= 1:
            motion.mode = "normal"
            motion.retreat_path = []
            if motion.current_vertex not in view.region:
                raise InvariantViolation(
                    "coverage-guarantee.3",
                    f"agent {motion.agent} finished its retreat outside its region at t={t}")
    if motion.pending_region is not None:
        within = motion.pending_region
        motion.pending_region = None
        if motion.mode == "normal" and motion.current_vertex not in view.region:
            _retreat(g, motion, within, view.region, t)


def advance_motion(g: EnvironmentGraph, motion: MotionState, view: AgentTimingView,
                   likelihood: LikelihoodSchedule, planner: Planner, now: float,
                   horizon: float, check_contract: bool = True) -> MotionStep:
    """Move the agent from ``now`` to ``horizon`` (updates ``motion`` in place).

    A transit that ends exactly at ``horizon`` is completed, but no new
    decision is taken at ``horizon`` itself.
    """
    if not horizon >= now:
        raise ValueError(f"horizon {horizon} precedes now {now}")
    a = motion.agent
    records: list[OccupancyRecord] = []
    arrivals: list[tuple[float, int]] = []
    t = now
    while True:
        tr = motion.transit
        if tr is not None:
            end = min(tr.arrive, horizon)
            if end > t:
                records.append(OccupancyRecord(a, tr.frm, t, end, True))
                records.append(OccupancyRecord(a, tr.to, t, end, True))
            if tr.arrive > horizon:
                break
            t = tr.arrive
            _arrive(g, motion, view, t)
            arrivals.append((t, motion.current_vertex))
        if t >= horizon:
            break
        if motion.mode == "retreat":
            target = motion.retreat_path[1]
        else:
            target = planner.next_move(g, view, motion, likelihood, t)
            if target is not None and check_contract:
                check_move(g, view, motion, target, t)
        if target is None:
            records.append(OccupancyRecord(a, motion.current_vertex, t, horizon, False))
            break
        v = motion.current_vertex
        motion.transit = Transit(v, int(target), t, t + g.weight(v, target) / motion.speed)
    return MotionStep(records, arrivals)

"""Base-station side of the coverage scheme.

The base station owns the global covering, the generators, the per-vertex
identifiers, the timers and the last-contact times. Every exchange with
an agent runs :func:`base_update`, which may grow the agent's region by an
additive subset, re-time everyone it took vertices from, and hands the
agent its new local variables.

Regions are stored as boolean masks (``covering[i]`` is agent i's
region). Timers are stored as absolute expiry times, so
``T_i(t) = max(0, timer_expiry[i] - t)`` with no drift.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import (InitializationError, InvariantViolation, ScheduleError,
                     SizeLimitError)
from .graph import EnvironmentGraph, distances_within
from .likelihood import AgentTimingView, LikelihoodSchedule

SNAPSHOT_SCHEMA = "coverops.snapshot"
SNAPSHOT_VERSION = 1

# relative slack when comparing float costs in certificates
COST_TOL = 1e-9
MAX_EXHAUSTIVE_VERTICES = 10
MAX_EXHAUSTIVE_AGENTS = 3
MAX_EXHAUSTIVE_COVERINGS = 250_000


@dataclass(frozen=True)
class MissionParams:
    speeds: tuple[float, ...]
    delta_bar: float
    delta_lower: float
    delta_H: float

    def __post_init__(self):
        object.__setattr__(self, "speeds", tuple(float(s) for s in self.speeds))
        if not self.speeds:
            raise ValueError("at least one agent speed is required")
        for name in ("delta_bar", "delta_lower", "delta_H"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if any(not s > 0 for s in self.speeds):
            raise ValueError("agent speeds must be positive")
        if self.delta_bar < self.m * self.delta_lower:
            raise ScheduleError(
                f"delta_bar={self.delta_bar} < m*delta_lower={self.m * self.delta_lower}: "
                "no schedule can honor both communication bounds")

    @property
    def m(self) -> int:
        return len(self.speeds)


@dataclass(frozen=True)
class AgentPayload:
    """Variables handed to the communicating agent at the end of an exchange."""

    region: frozenset
    generator: int
    recently_added: frozenset
    tau: float
    omega: float

    def view(self) -> AgentTimingView:
        return AgentTimingView(self.region, self.recently_added, self.tau, self.omega)


@dataclass
class BaseStationState:
    covering: np.ndarray          # (m, n) bool
    generators: np.ndarray        # (m,) int
    identifier: np.ndarray        # (n,) int, agent index per vertex
    timer_expiry: np.ndarray      # (m,) float
    last_contact: np.ndarray      # (m,) float
    # base-station mirror of the agent-side timing variables
    agent_tau: np.ndarray = field(default=None)
    agent_recent: np.ndarray = field(default=None)

    @property
    def m(self) -> int:
        return self.covering.shape[0]

    @property
    def n(self) -> int:
        return self.covering.shape[1]

    def timer(self, i: int, t: float) -> float:
        return max(0.0, float(self.timer_expiry[i]) - t)

    def id_mask(self, i: int) -> np.ndarray:
        return self.identifier == i

    def id_partition(self) -> np.ndarray:
        return np.stack([self.identifier == i for i in range(self.m)])

    def region(self, i: int) -> frozenset:
        return frozenset(int(v) for v in np.flatnonzero(self.covering[i]))

    def view(self, i: int) -> AgentTimingView:
        return AgentTimingView(self.region(i),
                               frozenset(int(v) for v in np.flatnonzero(self.agent_recent[i])),
                               float(self.agent_tau[i]), float(self.last_contact[i]))

    def copy(self) -> "BaseStationState":
        return BaseStationState(self.covering.copy(), self.generators.copy(),
                                self.identifier.copy(), self.timer_expiry.copy(),
                                self.last_contact.copy(), self.agent_tau.copy(),
                                self.agent_recent.copy())

    def is_partition(self) -> bool:
        return bool((self.covering.sum(axis=0) == 1).all())

    def snapshot(self, t: float) -> dict:
        return {
            "schema": SNAPSHOT_SCHEMA,
            "version": SNAPSHOT_VERSION,
            "time": float(t),
            "covering": [[int(v) for v in np.flatnonzero(row)] for row in self.covering],
            "generators": [int(c) for c in self.generators],
            "identifier": [int(x) for x in self.identifier],
            "timer_expiry": [float(x) for x in self.timer_expiry],
            "timers": [self.timer(i, t) for i in range(self.m)],
            "last_contact": [float(x) for x in self.last_contact],
        }

    @classmethod
    def from_snapshot(cls, doc: dict, n: int, delta_H: float = 0.0) -> "BaseStationState":
        if doc.get("schema") != SNAPSHOT_SCHEMA:
            raise ValueError("not a coverops snapshot")
        m = len(doc["covering"])
        covering = np.zeros((m, n), dtype=np.bool_)
        for i, row in enumerate(doc["covering"]):
            covering[i, row] = True
        return cls(covering, np.array(doc["generators"], dtype=np.int64),
                   np.array(doc["identifier"], dtype=np.int64),
                   np.array(doc["timer_expiry"], dtype=np.float64),
                   np.array(doc["last_contact"], dtype=np.float64),
                   np.full(m, -float(delta_H)), np.zeros((m, n), dtype=np.bool_))


# ---------------------------------------------------------------- costs


def region_costs(g: EnvironmentGraph, covering: np.ndarray, generators: Sequence[int],
                 speeds: Sequence[float]) -> np.ndarray:
    """Row i: time for agent i to reach each vertex from its generator inside its region."""
    out = np.full(covering.shape, np.inf)
    for i, c in enumerate(generators):
        if covering[i, c]:
            out[i] = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, covering[i],
                                              np.array([c], dtype=np.int64)) / speeds[i]
    return out


def covering_cost(g: EnvironmentGraph, covering: np.ndarray, generators: Sequence[int],
                  speeds: Sequence[float], masses: np.ndarray) -> float:
    """Expected generator-to-event time for a covering; each vertex uses its best region."""
    cost = region_costs(g, covering, generators, speeds).min(axis=0)
    return float(_kernels.cost_sum(masses, cost))


def coverage_cost(state: BaseStationState, g: EnvironmentGraph, params: MissionParams,
                  phi: LikelihoodSchedule, t: float) -> float:
    return covering_cost(g, state.covering, state.generators, params.speeds, phi.masses_at(t))


def identifier_cost(state: BaseStationState, g: EnvironmentGraph, params: MissionParams,
                    phi: LikelihoodSchedule, t: float) -> float:
    """Cost of the generators paired with the identifier partition instead of the covering."""
    return covering_cost(g, state.id_partition(), state.generators, params.speeds,
                         phi.masses_at(t))


# ---------------------------------------------------------------- init


def weighted_voronoi(g: EnvironmentGraph, generators: Sequence[int],
                     speeds: Sequence[float]) -> np.ndarray:
    """Owner per vertex: argmin_i d_Q(k, c_i) / s_i, ties to the lowest index."""
    full = np.ones(g.n, dtype=np.bool_)
    times = np.vstack([
        _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, full,
                                 np.array([c], dtype=np.int64)) / s
        for c, s in zip(generators, speeds)
    ])
    return np.argmin(times, axis=0)


def init_state(g: EnvironmentGraph, params: MissionParams,
               generators: Sequence[int]) -> tuple[BaseStationState, list[AgentPayload]]:
    m = params.m
    gens = [int(c) for c in generators]
    if len(gens) != m:
        raise InitializationError(f"expected {m} generators, got {len(gens)}")
    for c in gens:
        if not 0 <= c < g.n:
            raise InitializationError(f"generator {c} is not a vertex")
    if len(set(gens)) != m:
        raise InitializationError("generators must be distinct")
    owner = weighted_voronoi(g, gens, params.speeds)
    covering = np.stack([owner == i for i in range(m)])
    for i in range(m):
        if not covering[i].any():
            raise InitializationError(f"Voronoi cell of agent {i} is empty")
        if not _kernels.is_connected_mask(g.indptr, g.indices, covering[i]):
            raise InitializationError(f"Voronoi cell of agent {i} is disconnected")
    state = BaseStationState(
        covering=covering,
        generators=np.array(gens, dtype=np.int64),
        identifier=owner.astype(np.int64),
        timer_expiry=np.zeros(m),
        last_contact=np.zeros(m),
        agent_tau=np.full(m, -float(params.delta_H)),
        agent_recent=np.zeros_like(covering),
    )
    payloads = [AgentPayload(state.region(i), gens[i], frozenset(), -float(params.delta_H), 0.0)
                for i in range(m)]
    return state, payloads


def random_generators(g: EnvironmentGraph, params: MissionParams, rng: np.random.Generator,
                      attempts: int = 200) -> list[int]:
    """Distinct random generators whose weighted Voronoi cells are all connected."""
    for _ in range(attempts):
        gens = [int(c) for c in rng.choice(g.n, size=params.m, replace=False)]
        try:
            init_state(g, params, gens)
        except InitializationError:
            continue
        return gens
    raise InitializationError("could not draw generators with connected Voronoi cells")


# ---------------------------------------------------------------- additive subset


def _check_claim_hypotheses(state: BaseStationState, g: EnvironmentGraph, i: int) -> np.ndarray:
    base = state.id_mask(i)
    if not base.any() or not _kernels.is_connected_mask(g.indptr, g.indices, base):
        raise InvariantViolation("well-posedness",
                                 f"identifier set of agent {i} is empty or disconnected")
    others = np.delete(state.covering, i, axis=0)
    if others.size and (others & base).any():
        raise InvariantViolation("well-posedness",
                                 f"identifier set of agent {i} meets another agent's region")
    return base


def _claim_inputs(state: BaseStationState, g: EnvironmentGraph, params: MissionParams,
                  i: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-vertex best competing time (``inf`` if uncontested) and the blocked mask."""
    n = state.n
    threshold = np.full(n, np.inf)
    blocked = np.zeros(n, dtype=np.bool_)
    for j in range(state.m):
        if j == i:
            continue
        c = int(state.generators[j])
        if state.covering[j, c]:
            dj = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, state.covering[j],
                                          np.array([c], dtype=np.int64)) / params.speeds[j]
            np.minimum(threshold, dj, out=threshold)
        if state.timer(j, t) > 0:
            blocked |= state.covering[j]
    return threshold, blocked


def additive_subset(state: BaseStationState, g: EnvironmentGraph, params: MissionParams,
                    i: int, k: int, t: float) -> frozenset:
    """Largest connected superset of agent i's identifier set claimable from generator k."""
    base = _check_claim_hypotheses(state, g, i)
    if not base[k]:
        raise InvariantViolation("well-posedness", f"vertex {k} is not identified with agent {i}")
    threshold, blocked = _claim_inputs(state, g, params, i, t)
    region, _ = _kernels.additive_subset_kernel(g.indptr, g.indices, g.weights, base, blocked,
                                                threshold, params.speeds[i], k)
    return frozenset(int(v) for v in np.flatnonzero(region))


# ---------------------------------------------------------------- updates


@dataclass(frozen=True)
class TimerUpdate:
    tau: float
    omega: float
    expiry: dict          # agent index -> absolute timer expiry
    vacate_self: float    # time agent i needs to leave what it lost
    vacate_others: dict   # agent index -> time it needs to leave what was claimed


def timer_update(state: BaseStationState, g: EnvironmentGraph, params: MissionParams, i: int,
                 p_star, recently_added, t0: float) -> TimerUpdate:
    p_star = g.mask(p_star)
    recent = g.mask(recently_added)
    s = params.speeds
    lost = state.covering[i] & ~p_star
    vacate_self = 0.0
    if lost.any():
        d = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, state.covering[i],
                                     np.flatnonzero(p_star & ~recent).astype(np.int64))
        vacate_self = float(d[lost].max()) / s[i]
    expiry: dict[int, float] = {}
    vacate_others: dict[int, float] = {}
    longest = 0.0
    for j in range(state.m):
        if j == i:
            continue
        taken = state.covering[j] & p_star
        if not taken.any():
            continue
        d = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, state.covering[j],
                                     np.flatnonzero(state.covering[j] & ~p_star).astype(np.int64))
        vacate_others[j] = float(d[taken].max()) / s[j]
        expiry[j] = float(state.last_contact[j]) + params.delta_bar
        longest = max(longest, float(state.last_contact[j]) + params.delta_bar
                      + vacate_others[j] - t0)
    longest = max(longest, vacate_self)
    if not np.isfinite(longest):
        raise InvariantViolation("coverage-guarantee.3",
                                 f"no vacate path while updating agent {i} at t={t0}")
    expiry[i] = t0 + longest + params.delta_H
    return TimerUpdate(tau=longest, omega=t0, expiry=expiry, vacate_self=vacate_self,
                       vacate_others=vacate_others)


def base_update(state: BaseStationState, g: EnvironmentGraph, params: MissionParams,
                phi: LikelihoodSchedule, i: int, t0: float
                ) -> tuple[BaseStationState, AgentPayload]:
    """One exchange between the base station and agent i at time t0."""
    if not 0 <= i < state.m:
        raise IndexError(f"agent {i} out of range 0..{state.m - 1}")
    new = state.copy()
    base = state.id_mask(i)
    if state.timer(i, t0) > 0 and np.array_equal(base, state.covering[i]):
        new.agent_tau[i] = state.agent_tau[i] - t0 + state.last_contact[i]
        new.last_contact[i] = t0
        return new, _payload(new, i)

    base = _check_claim_hypotheses(state, g, i)
    speed = params.speeds[i]
    masses = phi.masses_at(t0)
    threshold, blocked = _claim_inputs(state, g, params, i, t0)
    c_i = int(state.generators[i])
    own = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, base,
                                   np.array([c_i], dtype=np.int64)) / speed
    baseline = float(_kernels.cost_sum(masses, np.minimum(own, threshold)))
    dmat = g.distance_matrix if g.n <= PRUNE_MAX_VERTICES else _NO_PRUNING
    best_k, best_mask, _ = _kernels.best_candidate(g.indptr, g.indices, g.weights, base,
                                                   blocked, threshold, speed, masses, baseline,
                                                   dmat)
    if best_k < 0:
        p_star, c_star = base, c_i
    else:
        p_star, c_star = best_mask, int(best_k)
    recent = p_star & ~base
    timers = timer_update(state, g, params, i, p_star, recent, t0)
    for j, exp in timers.expiry.items():
        new.timer_expiry[j] = exp
    new.last_contact[i] = t0
    new.agent_tau[i] = timers.tau
    new.agent_recent[i] = recent
    new.covering[i] = p_star
    new.generators[i] = c_star
    new.identifier[p_star] = i
    return new, _payload(new, i)


# all-pairs distances are cached per graph only up to this size
PRUNE_MAX_VERTICES = 3000
_NO_PRUNING = np.zeros((0, 0))


def _payload(state: BaseStationState, i: int) -> AgentPayload:
    return AgentPayload(state.region(i), int(state.generators[i]),
                        frozenset(int(v) for v in np.flatnonzero(state.agent_recent[i])),
                        float(state.agent_tau[i]), float(state.last_contact[i]))


# ---------------------------------------------------------------- invariants


def check_state_invariants(state: BaseStationState, g: EnvironmentGraph, t: float,
                           views: Sequence[AgentTimingView] | None = None) -> list[tuple[str, str]]:
    """Every set property the update scheme guarantees; empty list when clean.

    ``views`` are the agents' own timing variables; the base station's
    mirror of them is used when omitted.
    """
    out: list[tuple[str, str]] = []
    m, n = state.m, state.n
    ip, ix = g.indptr, g.indices
    ids = state.identifier
    if ids.shape != (n,) or (ids < 0).any() or (ids >= m).any():
        return [("set-properties.1", "identifier vector is malformed")]
    for i in range(m):
        part = ids == i
        if not part.any():
            out.append(("set-properties.1", f"identifier set of agent {i} is empty"))
        elif not _kernels.is_connected_mask(ip, ix, part):
            out.append(("set-properties.1", f"identifier set of agent {i} is disconnected"))
    cov = state.covering
    if not cov.any(axis=0).all():
        miss = np.flatnonzero(~cov.any(axis=0))
        out.append(("set-properties.2", f"vertices {miss.tolist()} are in no region"))
    for i in range(m):
        if not cov[i].any():
            out.append(("set-properties.2", f"region of agent {i} is empty"))
        elif not _kernels.is_connected_mask(ip, ix, cov[i]):
            out.append(("set-properties.2", f"region of agent {i} is disconnected"))
    gens = [int(c) for c in state.generators]
    if len(set(gens)) != m:
        out.append(("set-properties.3", f"generators {gens} are not distinct"))
    for i, c in enumerate(gens):
        if not cov[i, c]:
            out.append(("set-properties.3", f"generator {c} of agent {i} is outside its region"))
    if views is None:
        views = [state.view(i) for i in range(m)]
    active = []
    for i, view in enumerate(views):
        region = g.mask(view.region)
        if (region & ~cov[i]).any():
            out.append(("set-properties.4", f"agent {i} local region exceeds its covering region"))
        act = region.copy()
        if not view.gate_open(t):
            act &= ~g.mask(view.recently_added)
        active.append(act)
    for i in range(m):
        for j in range(i + 1, m):
            both = active[i] & active[j]
            if both.any():
                out.append(("set-properties.5",
                            f"agents {i} and {j} share active vertices {np.flatnonzero(both).tolist()}"))
    counts = cov.sum(axis=0)
    own = cov[ids, np.arange(n)]
    if not own.all():
        out.append(("set-membership.1",
                    f"vertices {np.flatnonzero(~own).tolist()} are outside their identified region"))
    if (counts > 2).any():
        out.append(("set-membership.2", f"vertices {np.flatnonzero(counts > 2).tolist()} "
                                        "belong to more than 2 regions"))
    timers = np.maximum(0.0, state.timer_expiry - t)
    shared = counts > 1
    for k in np.flatnonzero(shared & (timers[ids] == 0)):
        out.append(("set-membership.3",
                    f"vertex {k} shared although the timer of agent {ids[k]} is zero"))
    # meets[j, l]: region j intersects identifier set l
    meets = (cov.astype(np.int64) @ np.eye(m, dtype=np.int64)[ids]) > 0
    for k in np.flatnonzero(shared):
        o = ids[k]
        for j in np.flatnonzero(cov[:, k]):
            if j == o:
                continue
            for ell in np.flatnonzero(meets[j]):
                if ell not in (j, o):
                    out.append(("set-membership.4",
                                f"region {j} meets identifier set {ell} via shared vertex {k}"))
    return out


def assert_state_invariants(state, g, t, views=None) -> None:
    problems = check_state_invariants(state, g, t, views)
    if problems:
        clause, msg = problems[0]
        raise InvariantViolation(clause, f"t={t}: {msg}" +
                                 (f" (+{len(problems) - 1} more)" if len(problems) > 1 else ""))


# ---------------------------------------------------------------- Pareto


def _tol(x: float) -> float:
    return COST_TOL * max(1.0, abs(x))


def pareto_certificate(state: BaseStationState, g: EnvironmentGraph, params: MissionParams,
                       phi: LikelihoodSchedule, t: float, mode: str = "local"
                       ) -> tuple[bool, dict | None]:
    """Check that (generators, covering) cannot be improved.

    ``local`` checks that no vertex of a region is a better generator for
    it and that no boundary vertex is strictly closer to a neighbouring
    generator. ``exhaustive`` enumerates every generator tuple and every
    covering (small instances only). Returns ``(ok, witness)``.
    """
    if not state.is_partition():
        raise ValueError("certificate requires the covering to be a partition")
    masses = phi.masses_at(t)
    if mode == "local":
        return _local_certificate(state, g, params, masses)
    if mode == "exhaustive":
        return _exhaustive_certificate(state, g, params, masses)
    raise ValueError(f"unknown certificate mode {mode!r}")


def _local_certificate(state, g, params, masses):
    s = params.speeds
    for i in range(state.m):
        region = state.covering[i]
        members = np.flatnonzero(region)
        c = int(state.generators[i])
        current = _region_load(g, region, c, masses)
        for k in members:
            load = _region_load(g, region, int(k), masses)
            if load < current - _tol(current):
                return False, {"condition": "generator", "agent": i, "vertex": int(k),
                               "current": current, "better": load}
    for i in range(state.m):
        region = state.covering[i]
        c = int(state.generators[i])
        d_i = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, region,
                                       np.array([c], dtype=np.int64))
        for k in range(state.n):
            if region[k]:
                continue
            via = min((d_i[u] + w for u, w in g.adjacency[k] if region[u]), default=np.inf)
            if not np.isfinite(via):
                continue
            j = int(state.identifier[k])
            cj = int(state.generators[j])
            d_j = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, state.covering[j],
                                           np.array([cj], dtype=np.int64))[k] / s[j]
            mine = via / s[i]
            if mine < d_j - _tol(d_j):
                return False, {"condition": "boundary", "agent": i, "vertex": int(k),
                               "owner": j, "claim_time": float(mine), "owner_time": float(d_j)}
    return True, None


def _region_load(g, region, c, masses) -> float:
    d = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, region,
                                 np.array([c], dtype=np.int64))
    return float(_kernels.cost_sum(np.where(region, masses, 0.0), d))


def covering_count(n: int, m: int) -> int:
    return (2 ** m - 1) ** n


def _exhaustive_certificate(state, g, params, masses):
    n, m = state.n, state.m
    count = covering_count(n, m)
    if n > MAX_EXHAUSTIVE_VERTICES or m > MAX_EXHAUSTIVE_AGENTS or count > MAX_EXHAUSTIVE_COVERINGS:
        raise SizeLimitError(f"exhaustive check limited to |Q|<={MAX_EXHAUSTIVE_VERTICES}, "
                             f"m<={MAX_EXHAUSTIVE_AGENTS} and <={MAX_EXHAUSTIVE_COVERINGS} "
                             f"coverings; got |Q|={n}, m={m} ({count} coverings)")
    s = params.speeds
    gens = [int(c) for c in state.generators]
    h = covering_cost(g, state.covering, gens, s, masses)
    for cbar in itertools.product(range(n), repeat=m):
        other = covering_cost(g, state.covering, cbar, s, masses)
        if other < h - _tol(h):
            return False, {"condition": "generators", "generators": list(cbar),
                           "current": h, "better": other}
    # each vertex goes to a nonempty subset of agents, encoded as a bitmask 1..2^m-1
    agents = np.arange(m)
    for choice in itertools.product(range(1, 2 ** m), repeat=n):
        bits = np.array(choice)
        cov = ((bits[None, :] >> agents[:, None]) & 1).astype(np.bool_)
        if not cov.any(axis=1).all():
            continue
        other = covering_cost(g, cov, gens, s, masses)
        if other < h - _tol(h):
            return False, {"condition": "covering",
                           "covering": [np.flatnonzero(r).tolist() for r in cov],
                           "current": h, "better": other}
    return True, None

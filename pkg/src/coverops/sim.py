"""Event-driven simulation of the base station and its agents.

One run owns a base-station state, one motion state per agent and an
event queue. Communications are drawn by :func:`schedule_next_comm`;
agents move continuously between events. Every exchange is followed by
the full invariant check, and the run aborts on the first violation.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (BaseStationState, MissionParams, base_update, check_state_invariants,
                   coverage_cost, identifier_cost, init_state, pareto_certificate,
                   random_generators)
from .errors import InvariantViolation, ScheduleError
from .graph import EnvironmentGraph, diameter_bound
from .likelihood import MODES, LikelihoodSchedule
from .planner import (MotionState, OccupancyRecord, Planner, advance_motion, make_planner,
                      on_communication)

CSV_VERSION = 1
TIME_EPS = 1e-12

# same-time events run in this order
_PRIORITY = {"switch": 0, "comm": 1, "gate": 2, "checkpoint": 3, "end": 4}


@dataclass(frozen=True)
class SimConfig:
    graph: EnvironmentGraph
    params: MissionParams
    likelihood: LikelihoodSchedule
    duration: float
    seed: int = 0
    generators: tuple[int, ...] | None = None
    planner: str = "greedy-ergodic"
    likelihood_mode: str = "instantaneous"
    checkpoints: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.likelihood.vertex_count != self.graph.n:
            raise ValueError("likelihood and graph disagree on the vertex count")
        if self.likelihood_mode not in MODES:
            raise ValueError(f"likelihood_mode must be one of {MODES}")
        if self.generators is not None and len(self.generators) != self.params.m:
            raise ValueError("one generator per agent is required")
        comm_window(self.graph, self.params)

    def with_seed(self, seed: int) -> "SimConfig":
        return SimConfig(self.graph, self.params, self.likelihood, self.duration, seed,
                         self.generators, self.planner, self.likelihood_mode, self.checkpoints)


def comm_window(g: EnvironmentGraph, params: MissionParams) -> float:
    """Longest per-agent gap the scheduler may use.

    An agent caught mid-edge acts on its payload only after arriving, so
    the window is shortened by one worst-case edge traversal.
    """
    window = params.delta_bar - g.max_weight / min(params.speeds)
    if window < params.m * params.delta_lower:
        raise ScheduleError(
            f"delta_bar={params.delta_bar} leaves a window of {window} after the edge margin, "
            f"below m*delta_lower={params.m * params.delta_lower}")
    return window


def schedule_next_comm(rng: np.random.Generator, last_global_comm: float,
                       deadlines: Sequence[float], delta_lower: float) -> tuple[int, float]:
    """Draw the next exchange: who talks to the base station, and when.

    An agent is eligible when, after it goes, the others can still be
    served in deadline order with ``delta_lower`` spacing. The agent is
    drawn uniformly among eligible ones, then the time uniformly in its
    feasible window.
    """
    d = np.asarray(deadlines, dtype=np.float64)
    m = d.size
    earliest = last_global_comm + delta_lower
    order = np.argsort(d, kind="stable")
    latest = np.empty(m)
    for a in range(m):
        others = d[order[order != a]]
        slack = others - delta_lower * np.arange(1, m)
        latest[a] = min(d[a], slack.min()) if m > 1 else d[a]
    eligible = np.flatnonzero(latest >= earliest - TIME_EPS)
    if eligible.size == 0:
        raise ScheduleError(f"no agent can communicate after t={last_global_comm} "
                            "without missing a deadline")
    a = int(eligible[rng.integers(eligible.size)])
    t = rng.uniform(earliest, max(earliest, latest[a]))
    return a, float(t)


@dataclass
class SimTrace:
    events: list = field(default_factory=list)          # (time, kind, agent, detail)
    cost_samples: list = field(default_factory=list)    # (time, H)
    id_cost_gap: float = 0.0                            # max |H(c,P^ID) - H(c,P)|
    occupancy: np.ndarray | None = None                 # seconds per vertex
    uncovered_intervals: list = field(default_factory=list)  # (vertex, start, end)
    max_uncovered: np.ndarray | None = None
    collisions: list = field(default_factory=list)      # (agent_a, agent_b, vertex, time)
    convergence: list = field(default_factory=list)     # (segment, converged_at, detected_at)
    checkpoints: list = field(default_factory=list)     # (time, tv_distance)
    snapshots: list = field(default_factory=list)
    switch_times: list = field(default_factory=list)
    uncovered_bound: float = math.inf
    duration: float = 0.0
    seed: int = 0
    final_state: BaseStationState | None = None

    @property
    def converged(self) -> bool:
        return bool(self.convergence)


def detect_collision(records: Sequence[OccupancyRecord]) -> list[tuple[int, int, int, float]]:
    """Pairs of agents whose occupancy of the same vertex overlaps in time."""
    by_vertex: dict[int, list[OccupancyRecord]] = {}
    for r in records:
        if r.exit > r.enter:
            by_vertex.setdefault(r.vertex, []).append(r)
    out = []
    for v in sorted(by_vertex):
        rs = by_vertex[v]
        if len({r.agent for r in rs}) < 2:
            continue
        for x in range(len(rs)):
            for y in range(x + 1, len(rs)):
                a, b = rs[x], rs[y]
                if a.agent == b.agent:
                    continue
                start = max(a.enter, b.enter)
                if start < min(a.exit, b.exit):
                    out.append((min(a.agent, b.agent), max(a.agent, b.agent), v, start))
    return out


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())


def _tol(x: float) -> float:
    return 1e-9 * max(1.0, abs(x))


class _Run:
    def __init__(self, config: SimConfig, check: bool, planners: Sequence[Planner] | None,
                 check_contract: bool):
        self.cfg = config
        self.g = g = config.graph
        self.p = p = config.params
        self.phi = config.likelihood
        self.check = check
        self.check_contract = check_contract
        self.window = comm_window(g, p)
        ss = np.random.SeedSequence(config.seed)
        gen_ss, sched_ss, plan_ss = ss.spawn(3)
        self.sched_rng = np.random.default_rng(sched_ss)
        gens = config.generators
        if gens is None:
            gens = random_generators(g, p, np.random.default_rng(gen_ss))
        self.state, payloads = init_state(g, p, gens)
        self.views = [pl.view() for pl in payloads]
        n = g.n
        self.motions = [MotionState.start(i, int(gens[i]), p.speeds[i], n) for i in range(p.m)]
        if planners is None:
            rngs = [np.random.default_rng(s) for s in plan_ss.spawn(p.m)]
            planners = [make_planner(config.planner, rngs[i], config.likelihood_mode)
                        for i in range(p.m)]
        self.planners = list(planners)
        self.trace = SimTrace(occupancy=np.zeros(n), max_uncovered=np.zeros(n),
                              duration=float(config.duration), seed=config.seed)
        self.trace.uncovered_bound = p.delta_bar + diameter_bound(g, p.speeds)
        self.uncovered_since = np.full(n, np.nan)
        self.hold_until = np.full(n, -np.inf)
        self.now = 0.0
        self.last_comm = 0.0
        self.queue: list = []
        self.seq = 0
        # convergence bookkeeping for the current likelihood segment
        self.segment = 0
        self.certified: set[int] = set()
        self.last_change: float | None = None
        self.first_comm: float | None = None
        self.segment_converged = False
        self.last_h: float | None = None

    # -- queue
    def push(self, t: float, kind: str, agent: int = -1) -> None:
        heapq.heappush(self.queue, (t, _PRIORITY[kind], self.seq, kind, agent))
        self.seq += 1

    def fail(self, clause: str, msg: str):
        raise InvariantViolation(clause, f"seed {self.cfg.seed}, t={self.now}: {msg}")

    # -- main loop
    def run(self) -> SimTrace:
        cfg, tr = self.cfg, self.trace
        for t in self.phi.switch_times:
            if t < cfg.duration:
                self.push(t, "switch")
        for t in sorted(set(cfg.checkpoints)):
            if 0 <= t <= cfg.duration:
                self.push(float(t), "checkpoint")
        self.push(cfg.duration, "end")
        self._schedule_comm()
        self._sample_cost(0.0)
        self._refresh_coverage()
        while self.queue:
            t = self.queue[0][0]
            self._advance(t)
            done = False
            while self.queue and self.queue[0][0] == t:
                _, _, _, kind, agent = heapq.heappop(self.queue)
                if kind == "switch":
                    self._on_switch(t)
                elif kind == "comm":
                    self._on_comm(agent, t)
                elif kind == "gate":
                    self._on_gate(agent, t)
                elif kind == "checkpoint":
                    self._on_checkpoint(t)
                else:
                    done = True
            self._refresh_coverage()
            self._check_retreats()
            if done:
                break
        self._close_uncovered(cfg.duration)
        tr.final_state = self.state
        return tr

    def _schedule_comm(self) -> None:
        deadlines = self.state.last_contact + self.window
        a, t = schedule_next_comm(self.sched_rng, self.last_comm, deadlines, self.p.delta_lower)
        if t < self.cfg.duration:
            self.push(t, "comm", a)

    def _advance(self, t: float) -> None:
        if t <= self.now:
            return
        records = []
        arrivals = []
        for i, motion in enumerate(self.motions):
            step = advance_motion(self.g, motion, self.views[i], self.phi, self.planners[i],
                                  self.now, t, self.check_contract)
            records.extend(step.records)
            arrivals.extend((ta, "arrival", i, v) for ta, v in step.arrivals)
        arrivals.sort(key=lambda e: (e[0], e[2]))
        self.trace.events.extend(arrivals)
        occ = self.trace.occupancy
        for r in records:
            occ[r.vertex] += (r.exit - r.enter) * (0.5 if r.in_transit else 1.0)
        hits = detect_collision(records)
        if hits:
            self.trace.collisions.extend(hits)
            if self.check:
                a, b, v, tc = hits[0]
                self.fail("collision-freedom", f"agents {a} and {b} share vertex {v} at {tc}")
        self.now = t

    # -- handlers
    def _on_switch(self, t: float) -> None:
        self.trace.events.append((t, "likelihood-switch", -1, None))
        self.trace.switch_times.append(t)
        self.segment += 1
        self.certified = set()
        self.last_change = None
        self.first_comm = None
        self.segment_converged = False
        self.last_h = None
        self._sample_cost(t)

    def _on_comm(self, i: int, t: float) -> None:
        g, p, old = self.g, self.p, self.state
        old_region = self.views[i].region
        prev_gen = int(old.generators[i])
        # an exchange only certifies if it actually searched, unblocked
        searched = not (old.timer(i, t) > 0 and np.array_equal(old.id_mask(i), old.covering[i]))
        others_idle = searched and all(old.timer(j, t) == 0 for j in range(p.m) if j != i)
        self.state, payload = base_update(old, g, p, self.phi, i, t)
        self.views[i] = payload.view()
        on_communication(g, self.motions[i], old_region, payload, t)
        self.trace.events.append((t, "comm", i, None))
        self.last_comm = t
        if payload.tau > 0 and payload.omega + payload.tau > t:
            self.push(payload.omega + payload.tau, "gate", i)
        h = self._sample_cost(t)
        if self.check:
            problems = check_state_invariants(self.state, g, t, self.views)
            if problems:
                clause, msg = problems[0]
                self.fail(clause, msg)
        changed = (payload.region != old_region) or payload.generator != prev_gen
        self._track_convergence(i, t, changed, others_idle, h)
        self._schedule_comm()

    def _on_gate(self, i: int, t: float) -> None:
        view = self.views[i]
        if view.gate_time != t:
            return
        self.trace.events.append((t, "gate", i, None))
        for k in view.recently_added:
            self.hold_until[k] = max(self.hold_until[k], t + self.p.delta_H)

    def _on_checkpoint(self, t: float) -> None:
        total = self.trace.occupancy.sum()
        hist = self.trace.occupancy / total if total > 0 else self.trace.occupancy
        self.trace.checkpoints.append((t, total_variation(hist, self.phi.masses_at(t))))
        self.trace.snapshots.append(self.state.snapshot(t))

    # -- bookkeeping
    def _sample_cost(self, t: float) -> float:
        h = coverage_cost(self.state, self.g, self.p, self.phi, t)
        self.trace.cost_samples.append((t, h))
        if self.last_h is not None and h > self.last_h + _tol(self.last_h) and self.check:
            self.fail("cost-monotonicity", f"cost rose from {self.last_h!r} to {h!r}")
        self.last_h = h
        if self.check or self.phi.is_static:
            h_id = identifier_cost(self.state, self.g, self.p, self.phi, t)
            gap = abs(h_id - h) if np.isfinite(h) else (0.0 if h_id == h else math.inf)
            self.trace.id_cost_gap = max(self.trace.id_cost_gap, gap)
            if self.check and self.phi.is_static and gap > 1e-9:
                self.fail("cost-identity", f"H(c,P^ID)={h_id!r} differs from H(c,P)={h!r}")
        return h

    def _track_convergence(self, i: int, t: float, changed: bool, others_idle: bool,
                           h: float) -> None:
        if self.first_comm is None:
            self.first_comm = t
        if changed:
            self.certified = set()
            self.last_change = t
            self.segment_converged = False
            return
        if self.segment_converged:
            return
        if others_idle and self.state.is_partition() and \
                np.array_equal(self.state.covering, self.state.id_partition()):
            self.certified.add(i)
        if len(self.certified) == self.p.m:
            at = self.last_change if self.last_change is not None else self.first_comm
            self.segment_converged = True
            self.trace.convergence.append((self.segment, at, t))
            self.trace.events.append((t, "convergence", -1, at))
            if self.check:
                ok, witness = pareto_certificate(self.state, self.g, self.p, self.phi, t, "local")
                if not ok:
                    self.fail("pareto-optimality", f"converged state fails: {witness}")

    def _active_cover(self) -> np.ndarray:
        st, t = self.state, self.now
        covered = np.zeros(st.n, dtype=np.bool_)
        for i in range(st.m):
            region = st.covering[i]
            if t - st.last_contact[i] < st.agent_tau[i]:
                region = region & ~st.agent_recent[i]
            covered |= region
        return covered

    def _refresh_coverage(self) -> None:
        t = self.now
        covered = self._active_cover()
        since = self.uncovered_since
        opened = ~covered & np.isnan(since)
        if self.check:
            early = opened & (self.hold_until > t)
            if early.any():
                self.fail("coverage-guarantee.2",
                          f"vertices {np.flatnonzero(early).tolist()} uncovered before their "
                          "hold time elapsed")
        since[opened] = t
        closing = covered & ~np.isnan(since)
        for k in np.flatnonzero(closing):
            self._record_gap(int(k), since[k], t)
        since[closing] = np.nan

    def _record_gap(self, k: int, start: float, end: float) -> None:
        gap = end - start
        if gap <= 0:
            return
        self.trace.uncovered_intervals.append((k, float(start), float(end)))
        if gap > self.trace.max_uncovered[k]:
            self.trace.max_uncovered[k] = gap
        if self.check and gap > self.trace.uncovered_bound:
            self.fail("coverage-guarantee.1",
                      f"vertex {k} uncovered for {gap} > {self.trace.uncovered_bound}")

    def _close_uncovered(self, t: float) -> None:
        for k in np.flatnonzero(~np.isnan(self.uncovered_since)):
            self._record_gap(int(k), self.uncovered_since[k], t)
        self.uncovered_since[:] = np.nan

    def _check_retreats(self) -> None:
        if not self.check:
            return
        st, t = self.state, self.now
        counts = st.covering.sum(axis=0)
        for m in self.motions:
            if m.mode != "retreat":
                continue
            for h in m.retreat_path[:-1]:
                owner = int(st.identifier[h])
                proh = (st.agent_recent[owner, h]
                        and t - st.last_contact[owner] < st.agent_tau[owner])
                if owner == m.agent or not proh or counts[h] != 1:
                    self.fail("coverage-guarantee.3",
                              f"retreat vertex {h} of agent {m.agent} is not safely prohibited")


def run(config: SimConfig, check: bool = True, planners: Sequence[Planner] | None = None,
        check_contract: bool = True) -> SimTrace:
    """Simulate one mission. ``check=False`` records violations instead of aborting
    where possible (collisions); it is meant for fault-injection tests."""
    return _Run(config, check, planners, check_contract).run()


# ---------------------------------------------------------------- metrics


def compute_metrics(trace: SimTrace) -> dict:
    occ = trace.occupancy
    total = occ.sum()
    samples = trace.cost_samples
    return {
        "seed": trace.seed,
        "duration": trace.duration,
        "collisions": len(trace.collisions),
        "converged": trace.converged,
        "convergence_time": trace.convergence[0][1] if trace.convergence else None,
        "max_uncovered": float(trace.max_uncovered.max()) if trace.max_uncovered.size else 0.0,
        "uncovered_bound": trace.uncovered_bound,
        "final_cost": samples[-1][1] if samples else None,
        "initial_cost": samples[0][1] if samples else None,
        "id_cost_gap": trace.id_cost_gap,
        "occupancy": (occ / total).tolist() if total > 0 else occ.tolist(),
        "tv": [[t, d] for t, d in trace.checkpoints],
        "exchanges": sum(1 for e in trace.events if e[1] == "comm"),
    }


def segment_monotone(trace: SimTrace, tol: float = 1e-9) -> bool:
    """Cost never rises except at likelihood switch instants."""
    switches = set(trace.switch_times)
    prev = None
    for t, h in trace.cost_samples:
        if prev is not None and t not in switches and h > prev + tol * max(1.0, abs(prev)):
            return False
        prev = h
    return True


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return "" if x is None else str(x)


def _csv(name: str, header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# coverops {name} v{CSV_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def render_csvs(trace: SimTrace) -> dict[str, str]:
    total = trace.occupancy.sum()
    frac = trace.occupancy / total if total > 0 else trace.occupancy
    return {
        "cost.csv": _csv("cost", ("time", "H"), trace.cost_samples),
        "uncovered.csv": _csv("uncovered", ("vertex", "max_gap"),
                              ((k, float(g)) for k, g in enumerate(trace.max_uncovered))),
        "occupancy.csv": _csv("occupancy", ("vertex", "fraction"),
                              ((k, float(f)) for k, f in enumerate(frac))),
        "events.csv": _csv("events", ("time", "kind", "agent"),
                           ((float(t), kind, a if a >= 0 else None)
                            for t, kind, a, _ in trace.events)),
    }


def write_outputs(trace: SimTrace, out_dir: str) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, text in render_csvs(trace).items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths.append(path)
    for snap in trace.snapshots:
        path = os.path.join(out_dir, f"snapshot_{snap['time']!r}.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(snap, fh, indent=1)
        paths.append(path)
    return paths

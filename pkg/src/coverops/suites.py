"""Property suites shared by ``coverops check`` and the acceptance tests."""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .core import MissionParams, additive_subset, pareto_certificate
from .errors import InvariantViolation
from .graph import build_grid
from .likelihood import LikelihoodSchedule, gaussian_masses
from .oracles import brute_force_additive_subset, random_claim_instance, random_connected_graph
from .sim import SimConfig, SimTrace, compute_metrics, run, segment_monotone

THREADS_ENV = "COVEROPS_THREADS"


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)
    clauses: Counter = field(default_factory=Counter)
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and not self.failures

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{status} {self.name}: {self.cases - len(self.failures)}/{self.cases} cases clean"
        if self.clauses:
            line += " (" + ", ".join(f"{k}={v}" for k, v in sorted(self.clauses.items())) + ")"
        return line


def worker_count(jobs: int) -> int:
    raw = os.environ.get(THREADS_ENV, "")
    cap = int(raw) if raw.isdigit() and int(raw) > 0 else (os.cpu_count() or 1)
    return max(1, min(cap, jobs))


def parallel_map(fn: Callable, items: Iterable) -> list:
    """Order-preserving map over worker processes (in-process when one worker)."""
    items = list(items)
    workers = worker_count(len(items))
    if workers == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def small_mission(duration: float = 2000.0, seed: int = 0) -> SimConfig:
    """Four agents on a 10x10 unit grid with a corner-centred Gaussian."""
    g = build_grid(10, 10, 1.0, "unit")
    phi = LikelihoodSchedule.static(gaussian_masses(g.centers(), (0.0, 0.0), 6.0))
    return SimConfig(g, MissionParams((1.0,) * 4, 10.0, 1.0, 2.0), phi, duration, seed)


# ---------------------------------------------------------------- run audit


@dataclass
class RunAudit:
    seed: int
    violation: tuple[str, str] | None
    metrics: dict | None
    monotone: bool = True
    pareto_local: bool | None = None    # None when the run never converged


def audit_run(config: SimConfig) -> RunAudit:
    try:
        trace = run(config)
    except InvariantViolation as exc:
        return RunAudit(config.seed, (exc.clause, exc.detail), None, False)
    pareto = None
    if trace.converged and config.likelihood.is_static:
        pareto, _ = pareto_certificate(trace.final_state, config.graph, config.params,
                                       config.likelihood, trace.duration, "local")
    return RunAudit(config.seed, None, compute_metrics(trace), segment_monotone(trace), pareto)


def invariant_suite(runs: int = 100, seed: int = 0, config: SimConfig | None = None
                    ) -> SuiteResult:
    base = config if config is not None else small_mission()
    res = SuiteResult("invariants")
    audits = parallel_map(audit_run, [base.with_seed(seed + r) for r in range(runs)])
    for a in audits:
        res.cases += 1
        if a.violation is not None:
            res.clauses[a.violation[0]] += 1
            res.failures.append((a.seed, *a.violation))
            continue
        m = a.metrics
        if m["collisions"]:
            res.clauses["collision-freedom"] += 1
            res.failures.append((a.seed, "collision-freedom", f"{m['collisions']} collisions"))
        if not a.monotone:
            res.clauses["cost-monotonicity"] += 1
            res.failures.append((a.seed, "cost-monotonicity", "cost rose within a segment"))
        if base.likelihood.is_static and not m["converged"]:
            res.clauses["convergence"] += 1
            res.failures.append((a.seed, "convergence", "no convergence within the horizon"))
        if a.pareto_local is False:
            res.clauses["pareto-optimality"] += 1
            res.failures.append((a.seed, "pareto-optimality", "final state fails the local check"))
    res.notes["audits"] = audits
    return res


# ---------------------------------------------------------------- additive subsets


def oracle_suite(cases: int = 500, seed: int = 0) -> SuiteResult:
    res = SuiteResult("oracle")
    rng = np.random.default_rng(seed)
    grown = 0
    for c in range(cases):
        inst = random_claim_instance(rng)
        fast = additive_subset(inst.state, inst.graph, inst.params, inst.agent, inst.candidate,
                               inst.time)
        slow = brute_force_additive_subset(inst.state, inst.graph, inst.params, inst.agent,
                                           inst.candidate, inst.time)
        res.cases += 1
        base = set(np.flatnonzero(inst.state.identifier == inst.agent).tolist())
        grown += len(slow) > len(base)
        if fast != slow:
            res.clauses["additive-subset"] += 1
            res.failures.append((c, sorted(fast), sorted(slow)))
    res.notes["grown"] = grown
    return res


# ---------------------------------------------------------------- Pareto


def tiny_mission(rng: np.random.Generator, seed: int, max_vertices: int = 8,
                 duration: float = 400.0) -> SimConfig:
    """Two equal-speed agents on a random weighted graph with a random static likelihood."""
    n = int(rng.integers(4, max_vertices + 1))
    g = random_connected_graph(rng, n, int(rng.integers(0, n)), max_weight=3)
    masses = rng.dirichlet(np.ones(n))
    masses /= masses.sum()
    params = MissionParams((1.0, 1.0), 10.0, 1.0, 2.0)
    return SimConfig(g, params, LikelihoodSchedule.static(masses), duration, seed)


def _pareto_case(config: SimConfig) -> tuple:
    try:
        trace: SimTrace = run(config)
    except InvariantViolation as exc:
        return ("violation", exc.clause, exc.detail)
    if not trace.converged:
        return ("unconverged", None, None)
    st, t = trace.final_state, trace.duration
    local_ok, local_w = pareto_certificate(st, config.graph, config.params, config.likelihood, t,
                                           "local")
    full_ok, full_w = pareto_certificate(st, config.graph, config.params, config.likelihood, t,
                                         "exhaustive")
    return ("ok" if local_ok and full_ok else "rejected", local_w, full_w)


def pareto_suite(cases: int = 40, seed: int = 0, max_vertices: int = 8) -> SuiteResult:
    res = SuiteResult("pareto")
    rng = np.random.default_rng(seed)
    configs = [tiny_mission(rng, seed + c, max_vertices) for c in range(cases)]
    for c, out in enumerate(parallel_map(_pareto_case, configs)):
        res.cases += 1
        kind = out[0]
        if kind != "ok":
            res.clauses[kind] += 1
            res.failures.append((c, *out))
    return res


SUITES = {"invariants": invariant_suite, "oracle": oracle_suite, "pareto": pareto_suite}

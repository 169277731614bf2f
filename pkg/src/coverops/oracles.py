"""Slow, independent reference implementations used to cross-check the fast paths.

Nothing here shares code with the compiled kernels: distances come from
Floyd-Warshall on the induced subgraph and sets are enumerated outright.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .core import BaseStationState, MissionParams
from .graph import EnvironmentGraph


def floyd_warshall(g: EnvironmentGraph, subset) -> dict[int, dict[int, float]]:
    """All-pairs distances of G(subset) as nested dicts (missing pair = unreachable)."""
    nodes = sorted(int(v) for v in subset)
    inside = set(nodes)
    d = {u: {v: (0.0 if u == v else math.inf) for v in nodes} for u in nodes}
    for u, v, w in g.edges:
        if u in inside and v in inside:
            d[u][v] = min(d[u][v], w)
            d[v][u] = min(d[v][u], w)
    for k in nodes:
        dk = d[k]
        for u in nodes:
            duk = d[u][k]
            if duk == math.inf:
                continue
            du = d[u]
            for v in nodes:
                alt = duk + dk[v]
                if alt < du[v]:
                    du[v] = alt
    return d


def _connected(g: EnvironmentGraph, subset: set[int]) -> bool:
    if not subset:
        return False
    start = next(iter(subset))
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for u, _ in g.adjacency[v]:
            if u in subset and u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == len(subset)


def claim_is_valid(state: BaseStationState, g: EnvironmentGraph, params: MissionParams,
                   i: int, k: int, t: float, candidate: set[int]) -> bool:
    """Direct reading of the claim conditions for one candidate set."""
    base = {int(v) for v in np.flatnonzero(state.identifier == i)}
    if not base <= candidate or not _connected(g, candidate):
        return False
    d_s = floyd_warshall(g, candidate)
    for h in candidate:
        for j in range(state.m):
            if j == i or not state.covering[j, h]:
                continue
            if state.timer(j, t) > 0:
                return False
            region = {int(v) for v in np.flatnonzero(state.covering[j])}
            d_j = floyd_warshall(g, region)[h].get(int(state.generators[j]), math.inf)
            if not d_s[h][k] / params.speeds[i] < d_j / params.speeds[j]:
                return False
    return True


def brute_force_additive_subset(state: BaseStationState, g: EnvironmentGraph,
                                params: MissionParams, i: int, k: int, t: float) -> frozenset:
    """Enumerate every superset of agent i's identifier set and keep the largest valid one.

    Raises ``AssertionError`` if the valid sets have no unique maximum.
    """
    base = {int(v) for v in np.flatnonzero(state.identifier == i)}
    rest = [v for v in range(g.n) if v not in base]
    valid = []
    for r in range(len(rest) + 1):
        for extra in itertools.combinations(rest, r):
            cand = base | set(extra)
            if claim_is_valid(state, g, params, i, k, t, cand):
                valid.append(frozenset(cand))
    union = frozenset().union(*valid)
    assert union in valid, "valid claims have no unique maximal element"
    return union


def brute_force_cost(g: EnvironmentGraph, covering, generators, speeds, masses) -> float:
    """Cost by direct summation over vertices with Floyd-Warshall distances."""
    tables = []
    for region, c in zip(covering, generators):
        members = {int(v) for v in (np.flatnonzero(region) if isinstance(region, np.ndarray)
                                    else region)}
        tables.append((members, floyd_warshall(g, members) if c in members else None, c))
    total = 0.0
    for k in range(g.n):
        if masses[k] == 0:
            continue
        best = math.inf
        for (members, table, c), s in zip(tables, speeds):
            if k in members and table is not None:
                best = min(best, table[k][c] / s)
        total += masses[k] * best
    return total


# ---------------------------------------------------------------- random instances


@dataclass
class ClaimInstance:
    graph: EnvironmentGraph
    params: MissionParams
    state: BaseStationState
    agent: int
    candidate: int
    time: float


def random_connected_graph(rng: np.random.Generator, n: int, extra_edges: int,
                           max_weight: int = 4) -> EnvironmentGraph:
    order = rng.permutation(n)
    edges = {}
    for idx in range(1, n):
        u, v = int(order[idx]), int(order[rng.integers(idx)])
        edges[(min(u, v), max(u, v))] = float(rng.integers(1, max_weight + 1))
    for _ in range(extra_edges):
        u, v = (int(x) for x in rng.choice(n, size=2, replace=False))
        edges.setdefault((min(u, v), max(u, v)), float(rng.integers(1, max_weight + 1)))
    return EnvironmentGraph(n, tuple((u, v, w) for (u, v), w in sorted(edges.items())))


def random_connected_partition(rng: np.random.Generator, g: EnvironmentGraph,
                               m: int) -> np.ndarray:
    """Owner per vertex; each part is grown from a random seed, so it is connected."""
    owner = np.full(g.n, -1, dtype=np.int64)
    seeds = rng.choice(g.n, size=m, replace=False)
    owner[seeds] = np.arange(m)
    while (owner < 0).any():
        frontier = [(v, u) for v in range(g.n) if owner[v] >= 0
                    for u, _ in g.adjacency[v] if owner[u] < 0]
        v, u = frontier[rng.integers(len(frontier))]
        owner[u] = owner[v]
    return owner


def random_claim_instance(rng: np.random.Generator, max_vertices: int = 10) -> ClaimInstance:
    """Random state satisfying the preconditions of an additive-subset query."""
    m = int(rng.integers(2, 4))
    n = int(rng.integers(m + 1, max_vertices + 1))
    g = random_connected_graph(rng, n, int(rng.integers(0, n)))
    owner = random_connected_partition(rng, g, m)
    i = int(rng.integers(m))
    covering = np.stack([owner == j for j in range(m)])
    # regions of other agents may still hold vertices identified with a third agent
    for j in range(m):
        if j == i:
            continue
        for _ in range(int(rng.integers(0, 3))):
            grow = [u for v in np.flatnonzero(covering[j]) for u, _ in g.adjacency[v]
                    if not covering[j, u] and owner[u] not in (i, j)]
            if not grow:
                break
            covering[j, grow[rng.integers(len(grow))]] = True
    gens = np.array([int(rng.choice(np.flatnonzero(covering[j]))) for j in range(m)])
    speeds = tuple(float(rng.choice([0.5, 1.0, 2.0])) for _ in range(m))
    t = 10.0
    expiry = np.where(rng.random(m) < 0.6, 0.0, t + rng.uniform(0.5, 5.0, size=m))
    params = MissionParams(speeds, delta_bar=10.0 * m, delta_lower=1.0, delta_H=1.0)
    state = BaseStationState(covering, gens, owner, expiry, np.zeros(m), np.full(m, -1.0),
                             np.zeros_like(covering))
    k = int(rng.choice(np.flatnonzero(owner == i)))
    return ClaimInstance(g, params, state, i, k, t)

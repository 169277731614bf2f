"""Discretized surveillance environment.

The environment is a weighted undirected graph over grid cells. All
distance queries run on induced subgraphs: a query only ever walks
through vertices of the subset it is given.
"""

from __future__ import annotations

import json
import math
from functools import cached_property
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .errors import GraphError, NoPathError

INFINITE = math.inf

WEIGHT_MODES = ("unit", "cell_size")


@dataclass(frozen=True)
class GridGeometry:
    rows: int
    cols: int
    cell_size: float

    def center(self, v: int) -> tuple[float, float]:
        r, c = divmod(v, self.cols)
        return ((c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size)

    def centers(self) -> np.ndarray:
        v = np.arange(self.rows * self.cols)
        r, c = np.divmod(v, self.cols)
        return np.column_stack([(c + 0.5) * self.cell_size, (r + 0.5) * self.cell_size])


@dataclass(frozen=True, eq=False)
class EnvironmentGraph:
    """Immutable weighted graph with vertex ids ``0..vertex_count-1``."""

    vertex_count: int
    edges: tuple[tuple[int, int, float], ...]
    grid: GridGeometry | None = None
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)
    adjacency: tuple[tuple[tuple[int, float], ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        n = self.vertex_count
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise GraphError(f"vertex_count must be a positive integer, got {n!r}")
        seen = set()
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        clean = []
        for u, v, w in self.edges:
            u, v, w = int(u), int(v), float(w)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) has an endpoint outside 0..{n - 1}")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            if not w > 0 or math.isinf(w):
                raise GraphError(f"edge ({u}, {v}) has non-positive or infinite weight {w}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
            clean.append((key[0], key[1], w))
            adj[u].append((v, w))
            adj[v].append((u, w))
        for row in adj:
            row.sort()
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(row) for row in adj])
        indices = np.array([u for row in adj for u, _ in row], dtype=np.int64)
        weights = np.array([w for row in adj for _, w in row], dtype=np.float64)
        object.__setattr__(self, "edges", tuple(sorted(clean)))
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "adjacency", tuple(tuple(row) for row in adj))

    @property
    def n(self) -> int:
        return self.vertex_count

    def neighbors(self, v: int) -> tuple[tuple[int, float], ...]:
        return self.adjacency[v]

    def weight(self, u: int, v: int) -> float:
        for x, w in self.adjacency[u]:
            if x == v:
                return w
        raise GraphError(f"({u}, {v}) is not an edge")

    def has_edge(self, u: int, v: int) -> bool:
        return any(x == v for x, _ in self.adjacency[u])

    @property
    def max_weight(self) -> float:
        return float(self.weights.max()) if self.weights.size else 0.0

    def mask(self, subset) -> np.ndarray:
        """Boolean membership mask for a vertex set (or a mask, passed through)."""
        if isinstance(subset, np.ndarray) and subset.dtype == np.bool_:
            if subset.shape != (self.vertex_count,):
                raise GraphError("mask has the wrong length")
            return subset
        m = np.zeros(self.vertex_count, dtype=np.bool_)
        arr = np.array(list(subset))
        if arr.size == 0:
            return m
        if arr.ndim == 1 and arr.dtype.kind in "iu" and arr.min() >= 0 \
                and arr.max() < self.vertex_count:
            m[arr] = True
            return m
        for v in arr.tolist() if arr.dtype.kind != "O" else subset:
            self._check_vertex(v)
        raise GraphError(f"invalid vertex subset {subset!r}")  # pragma: no cover

    def _check_vertex(self, v) -> None:
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.vertex_count):
            raise GraphError(f"{v!r} is not a vertex id in 0..{self.vertex_count - 1}")

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """Full-graph all-pairs distances, computed once per graph."""
        return all_distances(self)

    def centers(self) -> np.ndarray | None:
        return None if self.grid is None else self.grid.centers()

    def to_json(self) -> dict:
        doc = {
            "vertex_count": self.vertex_count,
            "edges": [[u, v, w] for u, v, w in self.edges],
        }
        if self.grid is not None:
            doc["grid"] = {"rows": self.grid.rows, "cols": self.grid.cols,
                           "cell_size": self.grid.cell_size}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "EnvironmentGraph":
        try:
            grid = doc.get("grid")
            geometry = None
            if grid is not None:
                geometry = GridGeometry(int(grid["rows"]), int(grid["cols"]),
                                        float(grid["cell_size"]))
            return cls(int(doc["vertex_count"]), tuple(tuple(e) for e in doc["edges"]),
                       geometry)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"malformed graph document: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_json())


def build_grid(rows: int, cols: int, cell_size: float = 1.0,
               weight_mode: str = "unit") -> EnvironmentGraph:
    """4-neighbour grid; vertex ``r * cols + c`` is the cell in row r, column c."""
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise GraphError(f"invalid dimensions {rows} x {cols}")
    if weight_mode not in WEIGHT_MODES:
        raise GraphError(f"weight_mode must be one of {WEIGHT_MODES}, got {weight_mode!r}")
    if not cell_size > 0:
        raise GraphError("cell_size must be positive")
    rows, cols = int(rows), int(cols)
    w = 1.0 if weight_mode == "unit" else float(cell_size)
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, w))
            if r + 1 < rows:
                edges.append((v, v + cols, w))
    return EnvironmentGraph(rows * cols, tuple(edges), GridGeometry(rows, cols, float(cell_size)))


def distances_within(g: EnvironmentGraph, subset, sources: Iterable[int]) -> np.ndarray:
    """Distance from the nearest source to every vertex, walking only inside ``subset``."""
    mask = g.mask(subset)
    src = np.fromiter((int(s) for s in sources), dtype=np.int64)
    return _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, mask, src)


def subgraph_distance(g: EnvironmentGraph, subset, source: int, targets) -> float:
    """Shortest weighted path length from ``source`` to any target inside G(subset).

    An empty target set yields 0 (min over the empty set is 0); an
    unreachable target set yields ``INFINITE``.
    """
    mask = g.mask(subset)
    g._check_vertex(source)
    if not mask[source]:
        raise GraphError(f"source {source} is not in the subset")
    tmask = g.mask(targets)
    if not tmask.any():
        return 0.0
    if (tmask & ~mask).any():
        raise GraphError("targets must lie inside the subset")
    dist = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, mask,
                                    np.array([source], dtype=np.int64))
    return float(dist[tmask].min())


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(1.0, abs(a), abs(b))


def shortest_path_in_subset(g: EnvironmentGraph, subset, source: int, targets) -> list[int]:
    """Minimum-length path inside G(subset) from ``source`` into ``targets``.

    Among equal-length paths the lexicographically smallest vertex
    sequence is returned.
    """
    mask = g.mask(subset)
    g._check_vertex(source)
    if not mask[source]:
        raise GraphError(f"source {source} is not in the subset")
    tmask = g.mask(targets) & mask
    if not tmask.any():
        raise NoPathError("no target inside the subset")
    # distance-to-targets field, then greedy descent picking the smallest id
    to_t = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, mask,
                                    np.flatnonzero(tmask).astype(np.int64))
    if math.isinf(to_t[source]):
        raise NoPathError(f"no path from {source} into the targets inside the subset")
    path = [int(source)]
    v = int(source)
    while not tmask[v]:
        for u, w in g.adjacency[v]:
            if mask[u] and _close(to_t[u] + w, to_t[v]):
                v = u
                break
        else:  # pragma: no cover - unreachable with a consistent field
            raise NoPathError("distance field is inconsistent")
        path.append(v)
    return path


def path_length(g: EnvironmentGraph, path: Sequence[int]) -> float:
    return sum(g.weight(a, b) for a, b in zip(path, path[1:]))


def is_connected(g: EnvironmentGraph, subset) -> bool:
    mask = g.mask(subset)
    if not mask.any():
        raise GraphError("connectivity of the empty set is undefined")
    return bool(_kernels.is_connected_mask(g.indptr, g.indices, mask))


def all_distances(g: EnvironmentGraph) -> np.ndarray:
    """Full-graph distance matrix (one Dijkstra per vertex)."""
    full = np.ones(g.n, dtype=np.bool_)
    return np.vstack([
        _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, full,
                                 np.array([v], dtype=np.int64))
        for v in range(g.n)
    ])


def diameter_bound(g: EnvironmentGraph, speeds: Sequence[float]) -> float:
    """max_i (1/s_i) * sum over edges of the full-graph distance between the endpoints."""
    speeds = list(speeds)
    if not speeds or any(not s > 0 for s in speeds):
        raise GraphError("speeds must be a non-empty list of positive numbers")
    full = np.ones(g.n, dtype=np.bool_)
    total = 0.0
    by_source: dict[int, list[int]] = {}
    for u, v, _ in g.edges:
        by_source.setdefault(u, []).append(v)
    for u in sorted(by_source):
        dist = _kernels.dijkstra_masked(g.indptr, g.indices, g.weights, full,
                                        np.array([u], dtype=np.int64))
        for v in by_source[u]:
            total += float(dist[v])
    return total / min(speeds)

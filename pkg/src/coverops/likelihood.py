"""Event likelihood: the global field, per-agent local likelihoods and the
prohibited/active regions derived from an agent's timing variables."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import LikelihoodError

MODES = ("instantaneous", "frozen")
SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LikelihoodSchedule:
    """Piecewise-constant probability mass function over vertices.

    ``segments`` is a sequence of ``(start_time, masses)``; a segment is
    active on ``[start, next_start)``, so a query exactly at a switch time
    sees the new masses.
    """

    segments: tuple[tuple[float, np.ndarray], ...]
    _starts: list = field(init=False, repr=False)

    def __post_init__(self):
        if not self.segments:
            raise LikelihoodError("a schedule needs at least one segment")
        clean = []
        n = None
        prev = None
        for start, masses in self.segments:
            start = float(start)
            arr = np.array(masses, dtype=np.float64)
            arr.setflags(write=False)
            if arr.ndim != 1 or arr.size == 0:
                raise LikelihoodError("masses must be a non-empty vector")
            if n is None:
                n = arr.size
                if start != 0.0:
                    raise LikelihoodError("the first segment must start at t=0")
            elif arr.size != n:
                raise LikelihoodError("all segments must cover the same vertices")
            if prev is not None and not start > prev:
                raise LikelihoodError("segment start times must be strictly increasing")
            if (arr < 0).any() or not np.isfinite(arr).all():
                raise LikelihoodError("masses must be finite and nonnegative")
            if abs(arr.sum() - 1.0) > SUM_TOL:
                raise LikelihoodError(f"masses sum to {float(arr.sum())!r}, expected 1")
            clean.append((start, arr))
            prev = start
        object.__setattr__(self, "segments", tuple(clean))
        object.__setattr__(self, "_starts", [s for s, _ in clean])

    @classmethod
    def static(cls, masses) -> "LikelihoodSchedule":
        return cls(((0.0, masses),))

    @property
    def vertex_count(self) -> int:
        return self.segments[0][1].size

    @property
    def switch_times(self) -> list[float]:
        return self._starts[1:]

    @property
    def is_static(self) -> bool:
        return len(self.segments) == 1

    def masses_at(self, t: float) -> np.ndarray:
        if t < 0:
            raise LikelihoodError(f"time must be nonnegative, got {t}")
        return self.segments[bisect.bisect_right(self._starts, t) - 1][1]

    def segment_index(self, t: float) -> int:
        return bisect.bisect_right(self._starts, t) - 1


def global_mass(s: LikelihoodSchedule, k: int, t: float) -> float:
    masses = s.masses_at(t)
    if not 0 <= k < masses.size:
        raise LikelihoodError(f"vertex {k} out of range")
    return float(masses[k])


@dataclass
class AgentTimingView:
    """The agent-side variables that gate its local likelihood."""

    region: frozenset
    recently_added: frozenset = frozenset()
    tau: float = 0.0
    omega: float = 0.0

    def __post_init__(self):
        self.region = frozenset(self.region)
        self.recently_added = frozenset(self.recently_added)
        if not self.recently_added <= self.region:
            raise LikelihoodError("recently_added must be a subset of region")

    def gate_open(self, t: float) -> bool:
        return t - self.omega >= self.tau

    @property
    def gate_time(self) -> float:
        """Instant at which the recently added vertices stop being prohibited."""
        return self.omega + self.tau


def local_mass(view: AgentTimingView, s: LikelihoodSchedule, k: int, t: float,
               mode: str = "instantaneous") -> float:
    if t < 0:
        raise LikelihoodError(f"time must be nonnegative, got {t}")
    if k not in view.region:
        return 0.0
    if view.gate_open(t) or k not in view.recently_added:
        if mode == "instantaneous":
            return global_mass(s, k, t)
        if mode == "frozen":
            return global_mass(s, k, max(view.omega, 0.0))
        raise LikelihoodError(f"unknown likelihood mode {mode!r}")
    return 0.0


def prohibited_region(view: AgentTimingView, t: float) -> frozenset:
    if t < 0:
        raise LikelihoodError(f"time must be nonnegative, got {t}")
    if view.gate_open(t):
        return frozenset()
    return view.recently_added


def active_region(view: AgentTimingView, t: float) -> frozenset:
    return view.region - prohibited_region(view, t)


def gaussian_masses(centers: np.ndarray, center: Sequence[float], sigma: float) -> np.ndarray:
    """Isotropic Gaussian sampled at cell centers and normalized to a pmf."""
    if not sigma > 0:
        raise LikelihoodError("sigma must be positive")
    c = np.asarray(center, dtype=np.float64)
    d2 = ((np.asarray(centers, dtype=np.float64) - c) ** 2).sum(axis=1)
    w = np.exp(-0.5 * d2 / sigma ** 2)
    total = w.sum()
    if not total > 0:
        raise LikelihoodError("gaussian underflows on every cell; increase sigma")
    return w / total


def random_gaussian_schedule(centers: np.ndarray, n_switches: int, horizon: float,
                             sigma: float, rng: np.random.Generator,
                             extent: tuple[float, float] | None = None) -> LikelihoodSchedule:
    """Gaussian fields re-centered at uniformly random points, switching at
    ``n_switches`` uniformly random instants in ``(0, horizon)``."""
    centers = np.asarray(centers, dtype=np.float64)
    if extent is None:
        extent = tuple(centers.max(axis=0) + centers.min(axis=0))
    times = np.sort(rng.uniform(0.0, horizon, size=n_switches))
    segs = []
    for t in [0.0, *times]:
        mu = rng.uniform((0.0, 0.0), extent)
        segs.append((float(t), gaussian_masses(centers, mu, sigma)))
    return LikelihoodSchedule(tuple(segs))

"""JSON run configuration: parsing, validation and the baseline mission."""

from __future__ import annotations

import copy
import json
from typing import Any

import numpy as np

from .core import MissionParams, init_state
from .errors import ConfigError, CoverOpsError, InitializationError, ScheduleError
from .graph import EnvironmentGraph, build_grid
from .likelihood import (MODES, LikelihoodSchedule, gaussian_masses,
                         random_gaussian_schedule)
from .planner import PLANNER_NAMES
from .sim import SimConfig, comm_window

# stream index reserved for drawing random likelihood schedules
LIKELIHOOD_STREAM = 3

BASELINE = {
    "graph": {"grid": {"rows": 20, "cols": 20, "cell_size": 5.0}, "weight_mode": "unit"},
    "agents": {"speeds": [1.0, 1.0, 1.0, 1.0], "generators": None},
    "protocol": {"delta_lower": 1.0, "delta_bar": 10.0, "delta_H": 2.0},
    "likelihood": {"type": "gaussian", "center": [0.0, 0.0], "sigma": 30.0},
    "likelihood_mode": "instantaneous",
    "planner": "greedy-ergodic",
    "duration": 10000.0,
    "seed": 0,
    "checkpoints": [1000.0, 10000.0],
}


def baseline_config(**overrides) -> dict:
    doc = copy.deepcopy(BASELINE)
    doc.update(overrides)
    return doc


def _graph(spec: Any) -> EnvironmentGraph:
    if not isinstance(spec, dict):
        raise ConfigError("graph: expected an object")
    if "grid" in spec:
        grid = spec["grid"]
        return build_grid(grid["rows"], grid["cols"], float(grid.get("cell_size", 1.0)),
                          spec.get("weight_mode", "unit"))
    return EnvironmentGraph.from_json(spec)


def _masses(spec: Any, g: EnvironmentGraph) -> np.ndarray:
    if "masses" in spec:
        arr = np.asarray(spec["masses"], dtype=np.float64)
        if arr.shape != (g.n,):
            raise ConfigError(f"likelihood: expected {g.n} masses, got {arr.size}")
        return arr
    if "gaussian" in spec:
        spec = spec["gaussian"]
    if "center" in spec:
        centers = g.centers()
        if centers is None:
            raise ConfigError("likelihood: a gaussian needs a grid graph for cell centers")
        return gaussian_masses(centers, spec["center"], float(spec["sigma"]))
    raise ConfigError("likelihood: segment needs 'masses' or 'gaussian'")


def _likelihood(spec: Any, g: EnvironmentGraph, seed: int, duration: float) -> LikelihoodSchedule:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError("likelihood: expected an object with a 'type'")
    kind = spec["type"]
    if kind == "uniform":
        return LikelihoodSchedule.static(np.full(g.n, 1.0 / g.n))
    if kind in ("gaussian", "masses"):
        return LikelihoodSchedule.static(_masses(spec, g))
    if kind == "schedule":
        segs = [(float(seg["t"]), _masses(seg, g)) for seg in spec["segments"]]
        return LikelihoodSchedule(tuple(segs))
    if kind == "random-switching":
        centers = g.centers()
        if centers is None:
            raise ConfigError("likelihood: random switching needs a grid graph")
        ss = np.random.SeedSequence(seed).spawn(LIKELIHOOD_STREAM + 1)[LIKELIHOOD_STREAM]
        return random_gaussian_schedule(centers, int(spec["switches"]),
                                        float(spec.get("horizon", duration)),
                                        float(spec["sigma"]), np.random.default_rng(ss))
    raise ConfigError(f"likelihood: unknown type {kind!r}")


def validate_config(doc: Any) -> list[str]:
    """Every problem found in a config document; empty when it is runnable."""
    problems: list[str] = []
    try:
        build(doc)
    except _Collected as exc:
        problems.extend(exc.problems)
    return problems


class _Collected(ConfigError):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def build(doc: Any, seed: int | None = None, checkpoints=None) -> SimConfig:
    """Turn a config document into a :class:`SimConfig` or raise with all diagnostics."""
    problems: list[str] = []

    def guard(label, fn):
        try:
            return fn()
        except (CoverOpsError, KeyError, TypeError, ValueError) as exc:
            detail = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
            problems.append(f"{label}: {detail}")
            return None

    if not isinstance(doc, dict):
        raise _Collected(["config: expected a JSON object"])
    for key in ("graph", "agents", "protocol", "likelihood", "duration"):
        if key not in doc:
            problems.append(f"config: missing required key {key!r}")
    if problems:
        raise _Collected(problems)
    if seed is None:
        seed = doc.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        problems.append("seed: must be a nonnegative integer")
        seed = 0
    duration = guard("duration", lambda: float(doc["duration"]))
    if duration is not None and not duration > 0:
        problems.append("duration: must be positive")
    g = guard("graph", lambda: _graph(doc["graph"]))
    agents = doc["agents"]
    speeds = guard("agents.speeds", lambda: [float(s) for s in agents["speeds"]])
    proto = doc["protocol"]
    params = None
    if speeds is not None:
        params = guard("protocol", lambda: MissionParams(
            tuple(speeds), float(proto["delta_bar"]), float(proto["delta_lower"]),
            float(proto["delta_H"])))
        if params is None and any(p.startswith("protocol") and "m*delta_lower" in p
                                  for p in problems):
            problems[-1] = problems[-1].replace("protocol:", "protocol: schedule infeasible:")
    if g is not None and params is not None:
        guard("protocol: schedule infeasible", lambda: comm_window(g, params))
    gens = agents.get("generators")
    if gens is not None and g is not None and params is not None:
        if not isinstance(gens, list) or len(gens) != params.m:
            problems.append(f"agents.generators: need one generator per agent ({params.m})")
        elif any(not isinstance(c, int) or not 0 <= c < g.n for c in gens):
            problems.append(f"agents.generators: every generator must be a vertex in 0..{g.n - 1}")
        elif len(set(gens)) != len(gens):
            problems.append("agents.generators: initialization requires distinct generators, "
                            "each inside its own region")
        else:
            guard("agents.generators: initialization", lambda: init_state(g, params, gens))
    phi = None
    if g is not None:
        phi = guard("likelihood", lambda: _likelihood(doc["likelihood"], g, seed, duration or 1.0))
    mode = doc.get("likelihood_mode", "instantaneous")
    if mode not in MODES:
        problems.append(f"likelihood_mode: must be one of {MODES}")
    planner = doc.get("planner", "greedy-ergodic")
    if planner not in PLANNER_NAMES:
        problems.append(f"planner: must be one of {PLANNER_NAMES}")
    if checkpoints is None:
        checkpoints = doc.get("checkpoints", [])
    cps = guard("checkpoints", lambda: tuple(float(x) for x in checkpoints))
    if cps is not None and any(x < 0 for x in cps):
        problems.append("checkpoints: times must be nonnegative")
    if problems:
        raise _Collected(problems)
    return SimConfig(g, params, phi, duration, seed, tuple(gens) if gens is not None else None,
                     planner, mode, cps)


def load(path: str, **kwargs) -> SimConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return build(doc, **kwargs)


__all__ = ["BASELINE", "baseline_config", "build", "load", "validate_config",
           "ConfigError", "InitializationError", "ScheduleError"]

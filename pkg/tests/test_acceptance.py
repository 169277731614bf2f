"""Acceptance criteria, each run at its stated size and tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary. The full-scale baseline batch takes several minutes on one core.
"""

import dataclasses
import os
import time

import numpy as np
import pytest

from coverops.config import baseline_config, build
from coverops.sim import render_csvs, run, segment_monotone, write_outputs
from coverops.suites import (audit_run, invariant_suite, oracle_suite, parallel_map,
                             pareto_suite, small_mission)

pytestmark = pytest.mark.slow

BASELINE_SEEDS = 50
UNCOVERED_BOUND = 770.0


@pytest.fixture(scope="module")
def small_runs():
    start = time.perf_counter()
    result = invariant_suite(runs=100, seed=0)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def baseline_mission():
    config = build(baseline_config())
    assert config.graph.n == 400 and config.params.speeds == (1.0,) * 4
    assert config.checkpoints == (1000.0, 10000.0)
    return config


@pytest.fixture(scope="module")
def baseline_runs(baseline_mission):
    return parallel_map(audit_run, [baseline_mission.with_seed(s) for s in range(BASELINE_SEEDS)])


def _static_audits(small_runs, baseline_runs):
    return list(small_runs[0].notes["audits"]) + list(baseline_runs)


def test_criterion_1_invariant_suite(small_runs, report):
    result, elapsed = small_runs
    ok = result.passed and result.cases == 100 and elapsed < 120.0
    report(1, ok, f"{result.summary().split(' ', 1)[1]}; {elapsed:.1f}s (target < 120s)")
    assert result.passed, result.failures[:5]
    assert result.cases == 100
    assert elapsed < 120.0


def test_criterion_2_additive_subset_oracle(report):
    result = oracle_suite(cases=500, seed=0)
    report(2, result.passed and result.cases == 500,
           f"{result.summary().split(' ', 1)[1]}; {result.notes['grown']} instances claimed extra vertices")
    assert result.passed, result.failures[:5]
    assert result.cases == 500


def test_criterion_3_cost_identity_and_monotone(small_runs, baseline_runs, report):
    audits = _static_audits(small_runs, baseline_runs)
    clean = [a for a in audits if a.violation is None]
    worst_gap = max(a.metrics["id_cost_gap"] for a in clean) if clean else np.inf
    monotone = sum(a.monotone for a in clean)
    ok = len(clean) == len(audits) and worst_gap <= 1e-9 and monotone == len(audits)
    report(3, ok, f"{len(audits)} static runs; worst |H(c,P^ID)-H(c,P)| = {worst_gap:.3g} "
                  f"(tol 1e-9); cost non-increasing in {monotone}/{len(audits)}")
    assert ok


def test_criterion_4_convergence_and_pareto(small_runs, baseline_runs, report):
    audits = _static_audits(small_runs, baseline_runs)
    converged = sum(1 for a in audits if a.metrics and a.metrics["converged"])
    local = sum(1 for a in audits if a.pareto_local)
    start = time.perf_counter()
    exhaustive = pareto_suite(cases=40, seed=0, max_vertices=8)
    elapsed = time.perf_counter() - start
    latest = max(a.metrics["convergence_time"] for a in audits if a.metrics)
    ok = (converged == local == len(audits) and exhaustive.passed and elapsed < 300.0)
    report(4, ok, f"{converged}/{len(audits)} static runs converged (latest at t={latest:.1f}); "
                  f"local certificate {local}/{len(audits)}; exhaustive check "
                  f"{exhaustive.cases - len(exhaustive.failures)}/{exhaustive.cases} "
                  f"in {elapsed:.1f}s (target < 300s)")
    assert converged == len(audits)
    assert local == len(audits)
    assert exhaustive.passed, exhaustive.failures
    assert elapsed < 300.0


def test_criterion_5_no_collisions(small_runs, baseline_runs, report):
    audits = _static_audits(small_runs, baseline_runs)
    hits = sum(a.metrics["collisions"] for a in audits if a.metrics)
    flagged = [a.seed for a in audits if a.violation and a.violation[0] == "collision-freedom"]
    ok = hits == 0 and not flagged
    report(5, ok, f"{hits} collisions across {len(audits)} runs (criteria 1 and 6)")
    assert ok


def test_criterion_6_uncovered_bound(baseline_mission, baseline_runs, report):
    bad = [a for a in baseline_runs if a.violation is not None]
    gaps = np.array([a.metrics["max_uncovered"] for a in baseline_runs if a.metrics])
    bound = baseline_runs[0].metrics["uncovered_bound"] if baseline_runs[0].metrics else None
    ok = (not bad and len(gaps) == BASELINE_SEEDS and bound == UNCOVERED_BOUND
          and (gaps <= UNCOVERED_BOUND).all())
    dist = (f"min {gaps.min():.2f}, median {np.median(gaps):.2f}, p90 "
            f"{np.percentile(gaps, 90):.2f}, max {gaps.max():.2f}; "
            f"{int((gaps < 75).sum())}/{len(gaps)} below 75") if gaps.size else "no data"
    report(6, ok, f"{BASELINE_SEEDS} seeds, max uncovered interval <= {bound}: {dist}")
    assert not bad, [(a.seed, a.violation) for a in bad]
    assert bound == UNCOVERED_BOUND
    assert (gaps <= UNCOVERED_BOUND).all()


def test_criterion_7_occupancy_approaches_likelihood(baseline_runs, report):
    drops = 0
    ratios = []
    for a in baseline_runs:
        tv = dict((t, d) for t, d in a.metrics["tv"])
        drops += tv[10000.0] < tv[1000.0]
        ratios.append(tv[10000.0] / tv[1000.0])
    ok = drops >= 45
    report(7, ok, f"TV(occupancy, phi) smaller at t=10000 than at t=1000 for {drops}/"
                  f"{len(baseline_runs)} seeds (need >= 45); median ratio {np.median(ratios):.3f}")
    assert ok


def test_criterion_8_quasi_static_segments(report):
    doc = baseline_config(duration=1000.0, checkpoints=[], likelihood={
        "type": "random-switching", "switches": 12, "sigma": 30.0, "horizon": 1000.0})
    seeds = range(10)
    rows = []
    for s in seeds:
        trace = run(build(doc, seed=s))
        switches = set(trace.switch_times)
        samples = trace.cost_samples
        spikes = sum(1 for (_, h0), (t1, h1) in zip(samples, samples[1:])
                     if t1 in switches and h1 > h0)
        rows.append((len(trace.switch_times), segment_monotone(trace), spikes))
    ok = all(n == 12 and mono for n, mono, _ in rows)
    report(8, ok, f"{len(rows)} runs with 12 switches in [0, 1000]: cost non-increasing "
                  f"within every segment in {sum(r[1] for r in rows)}/{len(rows)}; "
                  f"{sum(r[2] for r in rows)} upward jumps at switch instants")
    assert ok


def _csv_bytes(config):
    return render_csvs(run(config))


def test_criterion_9_determinism(tmp_path, monkeypatch, report):
    config = small_mission(duration=500.0, seed=7)
    config = dataclasses.replace(config, checkpoints=(250.0, 500.0))
    first = write_outputs(run(config), str(tmp_path / "a"))
    second = write_outputs(run(config), str(tmp_path / "b"))
    names = sorted(os.path.basename(p) for p in first)
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
               for n in names) and names == sorted(os.path.basename(p) for p in second)
    monkeypatch.setenv("COVEROPS_THREADS", "2")
    pooled = parallel_map(_csv_bytes, [config, config])
    same_pooled = pooled[0] == pooled[1] == render_csvs(run(config))
    ok = same and same_pooled
    report(9, ok, f"{len(names)} output files byte-identical across repeated runs; "
                  f"identical under a 2-process pool: {same_pooled}")
    assert ok

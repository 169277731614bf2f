"""Command-line entry point: ``coverops validate | run | check``."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import config as cfgmod
from .errors import ConfigError, CoverOpsError, InvariantViolation
from .sim import SimConfig, compute_metrics, run, write_outputs
from .suites import SUITES, parallel_map

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _checkpoints(text: str | None):
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad checkpoint list {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coverops",
                                description="Timed base-station coverage simulator")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a run configuration")
    v.add_argument("--config", required=True)

    r = sub.add_parser("run", help="simulate one mission or a batch of seeds")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--batch", type=int, default=1)
    r.add_argument("--seed", type=int, default=None, help="seed (base seed for batches)")
    r.add_argument("--checkpoints", type=_checkpoints, default=None,
                   help="comma-separated snapshot/TV times, e.g. 1000,10000")

    c = sub.add_parser("check", help="run a property suite")
    c.add_argument("suite", choices=sorted(SUITES))
    c.add_argument("--config", default=None, help="mission for the invariants suite")
    c.add_argument("--batch", type=int, default=None, help="number of runs / cases")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None, help="write a JSON report here")
    return p


def cmd_validate(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    problems = cfgmod.validate_config(doc)
    if problems:
        for line in problems:
            print(f"error: {line}")
        return EXIT_VIOLATION
    print("ok")
    return EXIT_OK


def _run_one(job: tuple[SimConfig, str]) -> dict:
    config, out_dir = job
    try:
        trace = run(config)
    except InvariantViolation as exc:
        return {"seed": config.seed, "violation": {"clause": exc.clause, "detail": exc.detail}}
    write_outputs(trace, out_dir)
    m = compute_metrics(trace)
    m.pop("occupancy")
    return m


def _summary_line(m: dict) -> str:
    if "violation" in m:
        v = m["violation"]
        return f"seed {m['seed']}: VIOLATION [{v['clause']}] {v['detail']}"
    conv = (f"converged at t={m['convergence_time']:.3f}" if m["converged"]
            else "not converged")
    return (f"seed {m['seed']}: {conv}; max uncovered {m['max_uncovered']:.3f} "
            f"(bound {m['uncovered_bound']:.1f}); collisions {m['collisions']}")


def cmd_run(args) -> int:
    if args.batch < 1:
        print("error: --batch must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        base = cfgmod.load(args.config, seed=args.seed, checkpoints=args.checkpoints)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    os.makedirs(args.out, exist_ok=True)
    if args.batch == 1:
        jobs = [(base, args.out)]
    else:
        jobs = [(base.with_seed(base.seed + b), os.path.join(args.out, f"run_{b:03d}"))
                for b in range(args.batch)]
    results = parallel_map(_run_one, jobs)
    for m in results:
        print(_summary_line(m))
    bad = [m for m in results if "violation" in m or m["collisions"]]
    if args.batch > 1:
        gaps = [m["max_uncovered"] for m in results if "violation" not in m]
        aggregate = {
            "runs": len(results),
            "violations": len(bad),
            "converged": sum(1 for m in results if m.get("converged")),
            "max_uncovered": max(gaps) if gaps else None,
            "per_run": results,
        }
        with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(aggregate, fh, indent=1)
        print(f"{len(results)} runs, {len(bad)} with violations, worst uncovered gap "
              f"{aggregate['max_uncovered']}")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_check(args) -> int:
    kwargs = {"seed": args.seed}
    if args.batch is not None:
        kwargs["runs" if args.suite == "invariants" else "cases"] = args.batch
    if args.suite == "invariants" and args.config:
        try:
            kwargs["config"] = cfgmod.load(args.config)
        except (OSError, ConfigError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_VIOLATION
    result = SUITES[args.suite](**kwargs)
    print(result.summary())
    for f in result.failures[:20]:
        print(f"  failure: {f}")
    if args.out:
        report = {"suite": result.name, "cases": result.cases, "passed": result.passed,
                  "clauses": dict(result.clauses),
                  "failures": [[str(x) for x in f] for f in result.failures]}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
    return EXIT_OK if result.passed else EXIT_VIOLATION


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"validate": cmd_validate, "run": cmd_run, "check": cmd_check}[args.command]
    try:
        return handler(args)
    except CoverOpsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())

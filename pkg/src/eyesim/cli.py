"""Command-line entry point: run scripted trials, batch experiments with
condition statistics, validate scenario files, and serve live teleoperation.

Exit codes: 0 success (timeouts included, reported in metadata), 2 input or
validation failure, 3 mid-trial numeric abort.
"""

from __future__ import annotations

import argparse
import glob
import json
import sys
from pathlib import Path

from .engine import SimulationNaNError, TraceInputSource, run_trial
from .formats import (
    ScenarioError,
    TraceError,
    build_world,
    load_scenario,
    parse_trace,
    run_hash,
    scenario_hash,
    write_trial_csv,
)
from .metrics import report_to_csv, report_to_text, summarize_conditions, trial_metrics


def _fail(msg: str, code: int) -> int:
    print(msg, file=sys.stderr)
    return code


def _run_one(scenario, trace_path: Path, out_dir: Path, seed, dt):
    """Run a single trial; returns (log, metrics, trial_id, written paths)."""
    samples = parse_trace(trace_path, scenario.mode)
    trace_bytes = trace_path.read_bytes()
    world = build_world(scenario, seed=seed, dt=dt)
    log = run_trial(world, TraceInputSource(samples), scenario.max_duration)
    log.meta["posture"] = scenario.posture
    log.meta["scenario_hash"] = scenario_hash(scenario)
    trial_id = run_hash(scenario, trace_bytes, world.seed, world.dt)
    out_dir.mkdir(parents=True, exist_ok=True)
    trial_path = out_dir / f"trial_{trial_id}.csv"
    write_trial_csv(log, trial_path)
    metrics = trial_metrics(log) if log.records else None
    metrics_path = out_dir / f"metrics_{trial_id}.json"
    payload = {
        "trial": trial_id,
        "completion_reason": log.meta["completion_reason"],
        "metrics": metrics.to_dict() if metrics else None,
    }
    metrics_path.write_bytes(
        (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()
    )
    return log, metrics, trial_id, (trial_path, metrics_path)


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        log, metrics, trial_id, paths = _run_one(
            scenario, Path(args.trace), Path(args.out), args.seed, args.dt
        )
    except (ScenarioError, TraceError) as err:
        return _fail(str(err), 2)
    except SimulationNaNError as err:
        return _fail(str(err), 3)
    print(f"trial {trial_id}: {log.meta['completion_reason']}")
    if metrics:
        d = metrics.dominant
        print(
            f"dominant hand: mean sclera {d.mean_sclera:.2f} mN, "
            f"max {d.max_sclera:.2f} mN, {d.pct_time_over_limit:.2f}% over limit"
        )
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_batch(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as err:
        return _fail(str(err), 2)
    conditions: dict[str, list[str]] = {}
    if args.conditions:
        for spec_item in args.conditions:
            label, _, pattern = spec_item.partition("=")
            if not pattern:
                return _fail(f"--conditions entries must be label=glob, got {spec_item!r}", 2)
            conditions[label] = sorted(glob.glob(pattern))
    else:
        conditions["all"] = sorted(glob.glob(args.traces))
    for label, paths in conditions.items():
        if not paths:
            return _fail(f"condition {label!r} matched no trace files", 2)
    out_dir = Path(args.out)
    groups = {}
    try:
        for label, paths in conditions.items():
            group = []
            for trace in paths:
                _, metrics, trial_id, _ = _run_one(
                    scenario, Path(trace), out_dir, args.seed, args.dt
                )
                if metrics is None:
                    return _fail(f"trace {trace} produced an empty trial", 2)
                group.append(metrics)
                print(f"[{label}] {trace} -> trial_{trial_id}.csv")
            groups[label] = group
    except (ScenarioError, TraceError) as err:
        return _fail(str(err), 2)
    except SimulationNaNError as err:
        return _fail(str(err), 3)
    report = summarize_conditions(groups)
    (out_dir / "report.csv").write_bytes(report_to_csv(report).encode())
    (out_dir / "report.txt").write_bytes(report_to_text(report).encode())
    print(report_to_text(report))
    print(f"wrote {out_dir / 'report.csv'} and {out_dir / 'report.txt'}")
    return 0


def cmd_validate(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as err:
        return _fail(str(err), 2)
    print(f"ok: scenario hash {scenario_hash(scenario)}")
    return 0


def cmd_serve(args) -> int:
    from .teleop import serve_blocking  # deferred: asyncio machinery

    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as err:
        return _fail(str(err), 2)
    try:
        serve_blocking(
            scenario,
            host=args.host,
            port=args.port,
            tick_hz=args.tick_hz,
            out_dir=Path(args.out),
            duration=args.duration,
        )
    except OSError as err:
        return _fail(f"cannot bind {args.host}:{args.port}: {err}", 2)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eyesim",
        description="Deterministic bimanual eye-surgery simulator and control stack",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scripted trial")
    p_run.add_argument("--scenario", required=True)
    p_run.add_argument("--trace", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.add_argument("--dt", type=float, default=None, help="override scenario dt")
    p_run.set_defaults(func=cmd_run)

    p_batch = sub.add_parser("batch", help="run trial batches and summarize conditions")
    p_batch.add_argument("--scenario", required=True)
    p_batch.add_argument("--traces", default="", help="trace glob when no conditions given")
    p_batch.add_argument("--out", required=True)
    p_batch.add_argument(
        "--conditions", nargs="*", default=None, metavar="LABEL=GLOB",
        help="named trace groups, e.g. sitting='traces/sit_*.csv'",
    )
    p_batch.add_argument("--seed", type=int, default=None)
    p_batch.add_argument("--dt", type=float, default=None)
    p_batch.set_defaults(func=cmd_batch)

    p_serve = sub.add_parser("serve", help="serve the live teleoperation WebSocket")
    p_serve.add_argument("--scenario", required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8765)
    p_serve.add_argument("--tick-hz", type=float, default=None,
                         help="real-time pacing; default 1/dt, 0 = unpaced")
    p_serve.add_argument("--out", default=".", help="directory for the session trial CSV")
    p_serve.add_argument("--duration", type=float, default=None,
                         help="stop after this many seconds of sim time")
    p_serve.set_defaults(func=cmd_serve)

    p_val = sub.add_parser("validate", help="validate a scenario file")
    p_val.add_argument("--scenario", required=True)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

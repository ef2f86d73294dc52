"""Command line entry point: ``swarmlane plan|batch|sweep|export``.

Exit codes: 0 on success, 1 when a single plan is infeasible, 2 on a bad
config or unusable output path.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from . import harness
from .harness import CONFIG_ENV, ConfigError

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", default="nominal",
                   help=f"scenario file or name looked up in ${CONFIG_ENV} / packaged configs")
    p.add_argument("--method", choices=harness.METHODS, default="pso")
    p.add_argument("--particles", type=int, help="swarm size (pso only)")
    p.add_argument("--predictor", choices=("idm", "cv"), help="override the scenario's predictor")
    p.add_argument("--budget-ms", type=float, help="success budget and planner time budget (ms)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swarmlane", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan one scenario and print a summary")
    _common(p)
    p.add_argument("--seed", type=int, help="scenario seed (traffic draw and swarm)")
    p.add_argument("--trace", metavar="FILE", help="write the per-iteration swarm trace as JSON lines")

    e = sub.add_parser("export", help="plan one scenario and write trajectory/prediction/trace/report files")
    _common(e)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", required=True, help="output directory")

    b = sub.add_parser("batch", help="run independent seeded trials")
    _common(b)
    b.add_argument("--seed", type=int, help="master seed")
    b.add_argument("--trials", type=int)
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out", help="report JSON path")

    s = sub.add_parser("sweep", help="success rate against swarm size")
    _common(s)
    s.add_argument("--seed", type=int, help="master seed")
    s.add_argument("--trials", type=int)
    s.add_argument("--counts", default="1,2,3,4,5", help="comma separated particle counts")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="report JSON path")
    return ap


def _scenario(args, seed=None) -> harness.Scenario:
    scn = harness.build_scenario(args.config, seed)
    if args.budget_ms is not None:
        scn = dataclasses.replace(
            scn, planner=dataclasses.replace(scn.planner, time_budget_ms=args.budget_ms),
            batch=dataclasses.replace(scn.batch, success_budget_ms=args.budget_ms))
    return scn


def _print(obj):
    print(json.dumps(harness._clean(obj), indent=2, sort_keys=True, default=harness._json_default))


def cmd_plan(args) -> int:
    scn = _scenario(args, args.seed)
    result = harness.run_plan(scn, args.method, args.particles, args.predictor)
    if args.trace:
        with open(args.trace, "w") as fh:
            for row in result.trace:
                fh.write(json.dumps(harness._clean(row), sort_keys=True) + "\n")
    _print({"seed": scn.seed, "others_x": list(scn.others_x), **result.summary()})
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def cmd_export(args) -> int:
    scn = _scenario(args, args.seed)
    result = harness.run_plan(scn, args.method, args.particles, args.predictor)
    paths = harness.export_run(result, args.out, scn.dt)
    _print({name: str(p) for name, p in paths.items()})
    return EXIT_OK if result.feasible else EXIT_INFEASIBLE


def _report_line(label, report):
    a = report.aggregates()
    fmt = lambda v, spec: "n/a" if v is None else format(v, spec)
    return (f"{label:>10}  success {a['success_rate_pct']:5.1f}%  "
            f"clearance {fmt(a['mean_min_clearance_m'], '.3f')} m  "
            f"time {fmt(a['mean_time_ms'], '.1f')} ms  steps {fmt(a['median_steps_to_merge'], 'g')}")


def cmd_batch(args) -> int:
    scn = _scenario(args)
    report = harness.run_batch(scn, args.method, args.trials, args.particles, args.predictor,
                               master_seed=args.seed, workers=args.workers)
    print(_report_line(args.method, report))
    if args.out:
        harness.export_report(report, args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        counts = [int(c) for c in args.counts.split(",") if c.strip()]
    except ValueError:
        raise ConfigError(f"--counts must be comma separated integers, got {args.counts!r}")
    scn = _scenario(args)
    reports = harness.particle_sweep(scn, counts, args.trials, predictor=args.predictor,
                                     master_seed=args.seed, workers=args.workers)
    for n, rep in reports.items():
        print(_report_line(f"{n} part.", rep))
    if args.out:
        harness.export_report(reports, args.out)
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "export": cmd_export, "batch": cmd_batch, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``vsa sweep | map | bench | validate | plot``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import feeder as fm
from .oracle import SolverError
from .scenarios import (ScenarioSpec, plot_csv, run_benchmark, run_network_map, run_sweep,
                        sweep_points, write_bench_csv)

log = logging.getLogger("vsa")

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_SCHEMA = 0, 2, 3, 4


def _actor(text: str) -> tuple[str, str]:
    bus, sep, phase = text.rpartition(":")
    if not sep or not bus or phase not in fm.PHASES:
        raise argparse.ArgumentTypeError(f"expected <bus>:<a|b|c>, got {text!r}")
    return bus, phase


def _obs(text: str):
    return "all" if text == "all" else [b for b in text.split(",") if b]


def _feeder(path):
    if path is None:
        return fm.bundled_feeder()
    return fm.load_feeder(path)


def _emit(result, out):
    if out:
        result.write_csv(out)
    else:
        result.write_csv(sys.stdout)
    summary = {k: v for k, v in result.summary.items() if k != "depths"}
    print(json.dumps(summary, indent=1), file=sys.stderr)


def cmd_sweep(args):
    bus, phase = args.actor
    points = sweep_points(args.from_kw * 1e3, args.to_kw * 1e3, args.step_kw * 1e3)
    spec = ScenarioSpec(_feeder(args.feeder), bus, phase, points, args.obs,
                        args.q_kvar * 1e3, args.config)
    _emit(run_sweep(spec), args.out)


def cmd_map(args):
    bus, phase = args.actor
    spec = ScenarioSpec(_feeder(args.feeder), bus, phase, [args.delta_kw * 1e3], "all",
                        args.q_kvar * 1e3, args.config)
    _emit(run_network_map(spec), args.out)


def cmd_bench(args):
    entries = [int(s) for s in args.sizes.split(",") if s] if args.sizes else []
    entries += args.feeders or []
    table = run_benchmark(entries, repetitions=args.repetitions)
    write_bench_csv(table, args.out or sys.stdout)
    for r in table:
        log.info("n=%d analytic %.3g s, load flow %.3g s (x%.0f)",
                 r.n_buses, r.analytic_median_s, r.oracle_median_s, r.speedup)


def cmd_validate(args):
    text = Path(args.feeder).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise fm.SchemaError(f"not valid JSON: {exc}") from exc
    violations = fm.validate(fm.from_dict(doc))
    for v in violations:
        print(v)
    if violations:
        return EXIT_INVALID
    print(f"{args.feeder}: ok")
    return EXIT_OK


def cmd_plot(args):
    plot_csv(args.csv, args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vsa", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--feeder", help="feeder JSON file (default: bundled 12-bus feeder)")
        sp.add_argument("--actor", type=_actor, required=True, help="<bus>:<phase>")
        sp.add_argument("--q-kvar", type=float, default=0.0,
                        help="reactive power change added at every point")
        sp.add_argument("--config", choices=fm.CONFIGURATIONS,
                        help="override the actor load's connection")
        sp.add_argument("--out", help="output CSV (default: stdout)")

    sp = sub.add_parser("sweep", help="sweep real power at one actor phase")
    common(sp)
    sp.add_argument("--obs", type=_obs, default="all", help="bus, comma list, or all")
    sp.add_argument("--from-kw", type=float, required=True)
    sp.add_argument("--to-kw", type=float, required=True)
    sp.add_argument("--step-kw", type=float, required=True)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("map", help="one power change observed at every bus")
    common(sp)
    sp.add_argument("--delta-kw", type=float, required=True)
    sp.set_defaults(func=cmd_map)

    sp = sub.add_parser("bench", help="analytic query vs load-flow solve timing")
    sp.add_argument("--sizes", default="37,74,148,370", help="synthetic chain sizes")
    sp.add_argument("--feeders", nargs="*", help="extra feeder files to time")
    sp.add_argument("--repetitions", type=int, default=100)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("validate", help="list every invariant violation of a feeder file")
    sp.add_argument("--feeder", required=True)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("plot", help="SVG chart from a sweep or map CSV")
    sp.add_argument("--csv", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except fm.SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SolverError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (fm.ValidationError, fm.UnknownBus, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())

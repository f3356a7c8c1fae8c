"""Command line entry point: ``depguard run|compare|validate``.

Exit status is 0 on success, 2 when the scenario or arguments are invalid
and 1 for any other failure.  ``DEPGUARD_LOG`` (error, info or debug) sets
the stderr log level.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from depguard.harness import compare, run
from depguard.loop import LoopMode
from depguard.scenario import load_scenario_file
from depguard.simulator import ScenarioError

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2
LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("depguard")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of integers: {text!r}")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="depguard", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run one scenario in one mode")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--mode", required=True, choices=[m.value for m in LoopMode])
    p.add_argument("--ticks", type=_positive, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("compare", help="run all modes over several seeds")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seeds", type=_seeds, required=True)
    p.add_argument("--ticks", type=_positive, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=_positive, default=1)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    return parser


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("DEPGUARD_LOG", "error").lower(), logging.ERROR)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"depguard: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        scenario = load_scenario_file(args.scenario)
    except ScenarioError as exc:
        print(f"{args.scenario}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"{args.scenario}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        if args.command == "validate":
            print(f"{args.scenario}: ok ({len(scenario.nodes)} nodes, "
                  f"{len(scenario.fault_schedule)} faults)")
        elif args.command == "run":
            report = run(scenario, args.seed, LoopMode(args.mode), args.ticks, args.out)
            print(json.dumps({"availability": report.metrics["availability"],
                              "manual_interventions": report.metrics["manual_interventions"],
                              "out": args.out}))
        else:
            if len(args.seeds) < 2:
                print("depguard: compare needs at least 2 seeds", file=sys.stderr)
                return EXIT_INVALID
            summary = compare(scenario, args.seeds, args.ticks, args.out, workers=args.workers)
            for mode, row in summary["modes"].items():
                a = row["availability"]
                print(f"{mode:10s} availability mean={a['mean']} sd={a['stddev']}")
            print(f"ordering holds: {summary['ordering_holds']}")
            if summary["errors"]:
                return EXIT_RUNTIME
    except OSError as exc:
        print(f"{exc.filename or args.out}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - surface everything else as a runtime error
        log.debug("runtime failure", exc_info=True)
        print(f"depguard: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK

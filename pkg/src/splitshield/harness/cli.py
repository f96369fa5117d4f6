"""Command-line interface.

    splitshield [--scenario FILE] [--output-dir DIR] [--seed N]
                [--parallel K] [--format csv|json|both]
                {profile,partition,privacy-sweep,attack,report} ...

Without --scenario the built-in tinynet scenario runs. Errors exit nonzero
with a machine-readable JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..errors import SplitShieldError
from .report import emit_report, record_from_json
from .runner import (run_attack_campaign, run_partition_sweep, run_privacy_sweep,
                     run_profile)
from .scenario import Scenario, default_scenario_dict

_FORMATS = {"csv": ("csv",), "json": ("json",), "both": ("csv", "json")}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitshield",
        description="Partition planning, privacy sweeps and reconstruction "
                    "attacks for split DNN inference.")
    parser.add_argument("--scenario", help="scenario JSON (default: built-in tinynet)")
    parser.add_argument("--output-dir", help="override the scenario's output directory")
    parser.add_argument("--seed", type=int, help="override the master seed and per-run seed lists")
    parser.add_argument("--parallel", type=int, default=1,
                        help="worker processes for the attack campaign (default 1)")
    parser.add_argument("--format", choices=sorted(_FORMATS), default="both",
                        help="output tables to emit (default both)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("profile", help="per-layer FLOPs, compute times and transfer sizes")
    sub.add_parser("partition", help="partition plan per network preset/condition")
    sub.add_parser("privacy-sweep", help="argmax agreement per (mechanism, epsilon, seed)")
    sub.add_parser("attack", help="reconstruction attack campaign")
    rep = sub.add_parser("report", help="re-emit tables from a stored record")
    rep.add_argument("--record", required=True, help="path to a record.json")
    return parser


def _load_scenario(args) -> Scenario:
    if args.scenario:
        scenario = Scenario.load(args.scenario)
    else:
        scenario = Scenario.from_dict(default_scenario_dict())
    if args.seed is not None:
        scenario = scenario.with_seed_override(args.seed)
    return scenario


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    formats = _FORMATS[args.format]
    try:
        if args.command == "report":
            record = record_from_json(args.record)
            out_dir = Path(args.output_dir or "splitshield-out")
        else:
            scenario = _load_scenario(args)
            out_dir = Path(args.output_dir or scenario.output_dir)
            runner = {
                "profile": run_profile,
                "partition": run_partition_sweep,
                "privacy-sweep": run_privacy_sweep,
                "attack": lambda s: run_attack_campaign(s, parallelism=args.parallel),
            }[args.command]
            record = runner(scenario)
        paths = emit_report(record, out_dir, formats=formats)
    except (SplitShieldError, OSError) as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        field = getattr(exc, "field", None)
        if field:
            payload["field"] = field
        print(json.dumps(payload), file=sys.stderr)
        return 1
    if record.wall_clock_seconds is not None:
        print(f"done in {record.wall_clock_seconds:.2f}s", file=sys.stderr)
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

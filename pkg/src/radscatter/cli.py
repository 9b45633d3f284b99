"""Command-line entry point: ``radscatter <command> [--config FILE] [--out DIR] ...``."""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from .config import load_config
from .errors import RadScatterError
from .runner import COMMANDS, OUT_ENV, run, sweep

HELP = {
    "ground-state": "solve for the ground state and write it with a JSON sidecar",
    "classify": "classify the configured initial data against the thresholds",
    "evolve": "classify, evolve and run the audits listed in the config",
    "audit-morawetz": "evolve, then run the Morawetz identity and space-time audits",
    "audit-inequalities": "Gagliardo-Nirenberg, Trudinger-Moser and radial Sobolev audits",
    "scatter-check": "evolve, then test the Cauchy property of the pulled-back profile",
}


def _common(suppress: bool) -> argparse.ArgumentParser:
    d = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=d, help="YAML experiment config")
    p.add_argument("--out", default=d, help=f"run directory (default: ${OUT_ENV}/<command>-<run id>)")
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1, help="parallel sweep members")
    p.add_argument("--force", action="store_true", default=argparse.SUPPRESS if suppress else False,
                   help="redo a completed run directory")
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radscatter", parents=[_common(False)],
                                     description="Radial NLS/NLKG scattering experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[_common(True)], help=HELP[name])
    sw = sub.add_parser("sweep", parents=[_common(True)], help="repeat a command over values of one config path")
    sw.add_argument("--axis", required=True, help="dotted config path, e.g. nonlinearity.p")
    sw.add_argument("--values", default="", help="comma-separated values (parsed as YAML scalars)")
    sw.add_argument("--stage", default="evolve", choices=COMMANDS, help="command run for each member")
    return parser


def _values(text: str) -> list:
    if not text.strip():
        return []
    return [yaml.safe_load(v) for v in text.split(",")]


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "sweep":
            rows = sweep(cfg, args.axis, _values(args.values), args.stage, args.out, args.jobs, args.force)
            failed = sum(r["status"] != "complete" for r in rows)
            print(f"sweep: {len(rows)} members, {failed} failed")
            return 0
        res = run(cfg, args.command, args.out, args.force)
    except RadScatterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    note = " (already complete; --force to redo)" if res.skipped else ""
    print(f"{args.command}: {res.status} -> {res.out_dir}{note}")
    return res.exit_code


if __name__ == "__main__":
    sys.exit(main())

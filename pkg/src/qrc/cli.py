"""Command-line interface: ``qrc <kind> [options]`` and ``qrc validate``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from . import runner
from .exceptions import QRCError

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION = 0, 1, 2


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _pairs(items: Sequence[str], listy: bool) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise runner.ConfigError(f"expected key=value, got {item!r}")
        out[key] = [_value(v) for v in val.split(",")] if listy else _value(val)
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qrc", description="Quantum reservoir computing experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for kind in runner.KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} sweep")
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help="output directory (default results/<kind>)")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("--samples", type=int, help="samples per grid cell")
        sp.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                        help="sweep a parameter, e.g. --grid tau=0.5,1,2")
        sp.add_argument("--param", action="append", metavar="KEY=VALUE",
                        help="fixed setting, e.g. --param tau_max=200")
        sp.add_argument("--dump-signals", action="store_true", help="also write signals.csv")
    vp = sub.add_parser("validate", help="run the invariant checks")
    vp.add_argument("--corrupt", choices=["trace"], help="inject a fault to exercise the checker")
    vp.add_argument("--group", action="append", choices=list(runner.CHECKS), help="run only these groups")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE

    if args.command == "validate":
        report = runner.validate(args.corrupt, args.group)
        print("\n".join(report.lines()))
        return EXIT_OK if report.passed else EXIT_VALIDATION

    try:
        cfg = runner.load_config(args.config).to_dict() if args.config else {"kind": args.command}
        if cfg["kind"] != args.command:
            raise runner.ConfigError(f"config kind {cfg['kind']!r} does not match command {args.command!r}")
        cfg["grid"] = {**cfg.get("grid", {}), **_pairs(args.grid, True)}
        cfg["params"] = {**cfg.get("params", {}), **_pairs(args.param, False)}
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.samples is not None:
            cfg["samples"] = args.samples
        config = runner.ExperimentConfig.from_dict(cfg)
        if args.threads < 1:
            raise runner.ConfigError("--threads must be >= 1")
    except (QRCError, OSError, TypeError, ValueError) as exc:
        print(f"qrc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        paths = runner.run_experiment(config, args.out, args.threads, args.dump_signals)
    except QRCError as exc:
        print(f"qrc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command-line entry point: run or validate scenario configs."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from sliceguard.errors import ConfigurationError, ProtocolError
from sliceguard.scenario import BUNDLED_PREFIX, ScenarioRunner, bundled_scenario_path, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PROTOCOL = 3


def _resolve(ref: str) -> Path:
    if ref.startswith(BUNDLED_PREFIX):
        return bundled_scenario_path(ref[len(BUNDLED_PREFIX) :])
    return Path(ref)


def cmd_run(args) -> int:
    cfg, problems = load_config(_resolve(args.config))
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    runner = ScenarioRunner(cfg, mode=args.mode, out_dir=args.out)
    try:
        result = runner.run()
    except ProtocolError as exc:
        print(f"protocol failure mid-run: {exc} (partial outputs flushed)", file=sys.stderr)
        return EXIT_PROTOCOL
    print(f"wrote {result['metrics']}")
    print(f"wrote {result['summary']}")
    print(f"wrote {result['events']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        _, problems = load_config(_resolve(args.config))
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if problems:
        for p in problems:
            print(f"violation: {p}")
        print(f"{len(problems)} violations")
        return EXIT_CONFIG
    print("0 violations")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sliceguard")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario config to its TTI horizon")
    p_run.add_argument("config", help="path or bundled:<name>.cfg")
    p_run.add_argument("--mode", choices=("inproc", "sockets"), default="inproc")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config", help="path or bundled:<name>.cfg")
    p_val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

"""``request-sim`` command-line entry point."""

from __future__ import annotations

import argparse
import sys

from .experiments import KINDS, ConfigError, execute, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="request-sim",
        description="Noisy simulation and shot-cost analysis of copy-based error suppression.",
    )
    parser.add_argument("command", choices=KINDS)
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--out", help="output CSV path (a directory for rqc-gen)")
    parser.add_argument("--workers", type=int, help="worker processes for instance-level parallelism")
    parser.add_argument("--seed", type=int, help="base seed for instance generation")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"out": args.out, "workers": args.workers, "seed": args.seed}
    try:
        cfg = load_config(args.config, args.command, overrides)
    except ConfigError as exc:
        print(f"request-sim: config error: {exc}", file=sys.stderr)
        return 2
    paths, failures = execute(cfg)
    if cfg.kind == "rqc-gen":
        print(f"wrote {len(paths)} circuits to {cfg.out or 'rqc'}")
    else:
        for path in paths:
            print(path)
    for seed, err in failures:
        print(f"request-sim: instance seed={seed} failed: {err}", file=sys.stderr)
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())

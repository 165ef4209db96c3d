"""Command-line entry point.

Every subcommand runs one configured experiment and exits 0 when all verdicts
pass, 1 when any fails (or a run-time certificate breaks), 2 on usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from .harness import KINDS, RUNNERS, ConfigError, load_config


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exclusim",
        description="Exclusion-process simulator and variational toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run a configured {kind} experiment")
        p.add_argument("--config", required=True, help="experiment config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--replicas", type=int, default=None, help="override replica count")
        p.add_argument("--quiet", action="store_true", default=None)
    return parser


def cli_main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2

    overrides = {
        "seed": args.seed,
        "out": args.out,
        "format": args.format,
        "replicas": args.replicas,
        "quiet": args.quiet,
    }
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if cfg.kind != args.command:
        print(
            f"config error: config kind {cfg.kind!r} does not match "
            f"subcommand {args.command!r}",
            file=sys.stderr,
        )
        return 2

    try:
        result = RUNNERS[cfg.kind](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as e:
        print(f"run failed: {e}", file=sys.stderr)
        return 1

    result.write(cfg.out, fmt=cfg.format, quiet=cfg.quiet)
    if not cfg.quiet:
        if cfg.kind == "solve":
            print(repr(float(result.payload["value"])))
        elif cfg.kind == "conjugate":
            print(
                f"f(1) = {result.payload['f_at_1']!r}, current max "
                f"{result.payload['current_max']!r} at rho = "
                f"{result.payload['current_argmax_rho']!r}"
            )
    return 0 if result.passed else 1


def main() -> None:  # console-script shim
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Command-line front end: one subcommand per experiment type.

Every key of a command's config schema is exposed as a ``--key`` flag
(underscores become dashes); values given on the command line override the
``--config`` TOML file, which overrides the documented defaults.  Exit
codes: 0 all checks passed, 1 a check failed or the run errored, 2 the
invocation or config was unusable.
"""

from __future__ import annotations

import argparse
import sys

from .runner import COMMANDS, ConfigError, RunnerError, command_schema, parse_config, run

_COMMAND_HELP = {
    "evolve": "integrate the coupled system and check conservation drift",
    "fre": "sweep window size and modulation for a cataloged estimate and fit exponents",
    "counterexample": "run an ill-posedness growth harness over dyadic frequencies",
    "smoothing": "measure the smoothing gain of a Duhamel component from random data",
    "bourgain": "probe a cataloged estimate for divergence as the frequency cutoff grows",
    "catalog": "list cataloged estimates with validity and gain windows at (k, s)",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skdvlab",
        description="Numerical experiments for a coupled Schrodinger-KdV system.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=_COMMAND_HELP[command])
        sub.add_argument("--config", default=None, metavar="FILE",
                         help="TOML config file; flags given here win over it")
        for key, spec in command_schema(command).items():
            sub.add_argument(
                "--" + key.replace("_", "-"),
                dest=key,
                default=None,
                metavar=spec.kind.upper(),
                help=spec.help or key,
            )
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed its message
        return int(exc.code or 0)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2

    overrides = {
        key: value
        for key, value in vars(args).items()
        if key not in ("command", "config") and value is not None
    }
    try:
        config = parse_config(args.config, overrides, command=args.command)
    except ConfigError as exc:
        print(f"skdvlab: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"skdvlab: cannot read config: {exc}", file=sys.stderr)
        return 2

    try:
        report = run(config)
    except RunnerError as exc:
        print(f"skdvlab: {exc}", file=sys.stderr)
        return 1

    sys.stdout.write(report.summary_text)
    return report.exit_code


if __name__ == "__main__":
    raise SystemExit(main())

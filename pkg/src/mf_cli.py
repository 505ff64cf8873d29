#!/usr/bin/env python3
"""
mfkit: single entry point for the mainframe migration toolkit.

Each subcommand is the `main()` of one module, so
`mfkit recio compare ...` and `python src/mf_recio.py compare ...` behave
the same.

Exit codes:
    0  success / PASS
    1  semantic failure (mismatch, FAIL, record not found)
    2  usage, configuration or plan error
    3  I/O error or data corruption
"""

import argparse
import json
import sys
from collections.abc import Callable
from importlib import import_module
from importlib.metadata import PackageNotFoundError, version

from mf_console import ensure_utf8_streams, parse_arguments, status
from mf_errors import EXIT_OK, EXIT_USAGE

DISTRIBUTION = "mainframe-migration-kit"
FALLBACK_VERSION = "1.0.0"

SUBCOMMANDS = {
    "copybook": ("mf_copybook", "parse and pretty-print copybooks"),
    "codec": ("mf_codec", "decode records and transcode files between EBCDIC and ASCII"),
    "recio": ("mf_recio", "inspect, modify and compare record files"),
    "ksds": ("mf_ksds", "keyed dataset stores: load, scan, get, bench"),
    "migrate": ("mf_migrate", "load, unload, validate and prune stores"),
    "harness": ("mf_harness", "parallel legacy/modern runs with equivalence reports"),
}


def package_version() -> str:
    try:
        return version(DISTRIBUTION)
    except PackageNotFoundError:
        return FALLBACK_VERSION


def version_info() -> dict[str, str | int]:
    """Machine-readable version block printed by --version."""
    from mf_copybook import GRAMMAR_VERSION
    from mf_harness import PLAN_FORMAT_VERSION
    from mf_ksds import STORE_FORMAT_VERSION

    return {
        "name": DISTRIBUTION,
        "version": package_version(),
        "copybook_grammar": GRAMMAR_VERSION,
        "store_format": STORE_FORMAT_VERSION,
        "plan_format": PLAN_FORMAT_VERSION,
    }


def build_parser() -> argparse.ArgumentParser:
    from mf_console import add_logging_arguments

    commands = "\n".join(f"  {name:<10} {text}" for name, (_, text) in SUBCOMMANDS.items())
    parser = argparse.ArgumentParser(
        prog="mfkit",
        usage="mfkit [-h] [--version] [-v] [--log-level LEVEL] COMMAND [ARGS ...]",
        description="Toolkit for testing a mainframe COBOL/VSAM migration",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=f"""
Commands:
{commands}

Examples:
  mfkit copybook parse acct.cpy
  mfkit recio compare --schema acct.cpy --config acct.yaml legacy.dat modern.dat
  mfkit -v harness run demo/billing/plan.yaml

Run `mfkit COMMAND --help` for the options of each command.
Exit codes: 0 success, 1 semantic failure, 2 usage error, 3 I/O or corruption
        """,
    )
    parser.add_argument("--version", action="store_true", help="print version information as JSON")
    add_logging_arguments(parser)
    return parser


def split_global(argv: list[str]) -> tuple[list[str], str | None, list[str]]:
    """Split argv into global options, the command name and the command's own arguments."""
    index = 0
    while index < len(argv) and argv[index].startswith("-"):
        index += 2 if argv[index] == "--log-level" else 1
    head = argv[: min(index, len(argv))]
    if index >= len(argv):
        return head, None, []
    return head, argv[index], argv[index + 1 :]


def resolve(command: str) -> Callable[[list[str] | None], int]:
    module_name, _ = SUBCOMMANDS[command]
    entry: Callable[[list[str] | None], int] = import_module(module_name).main
    return entry


def dispatch(argv: list[str] | None = None) -> int:
    """Route argv to a subcommand's main() and return its exit code."""
    parser = build_parser()
    head, command, rest = split_global(sys.argv[1:] if argv is None else list(argv))
    args = parse_arguments(parser, head)
    if isinstance(args, int):
        return args
    if args.version:
        print(json.dumps(version_info(), sort_keys=True))
        return EXIT_OK
    if command is None:
        parser.print_usage(sys.stderr)
        status("❌ mfkit: a command is required")
        return EXIT_USAGE
    if command not in SUBCOMMANDS:
        parser.print_usage(sys.stderr)
        status(f"❌ mfkit: unknown command '{command}' (choose from {', '.join(SUBCOMMANDS)})")
        return EXIT_USAGE
    forwarded = ["-v"] * args.verbose
    if args.log_level:
        forwarded += ["--log-level", args.log_level]
    return resolve(command)(forwarded + rest)


def main(argv: list[str] | None = None) -> int:
    ensure_utf8_streams()
    return dispatch(argv)


if __name__ == "__main__":
    sys.exit(main())

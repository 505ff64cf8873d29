"""
Console plumbing shared by every mfkit command: UTF-8 streams on Windows,
logging setup, and the error guard that turns toolkit exceptions into
exit codes.

Data goes to stdout. Diagnostics, status lines and log records go to stderr.
"""

import argparse
import io
import logging
import sys
from collections.abc import Callable

from mf_errors import EXIT_CORRUPTION, EXIT_OK, EXIT_USAGE, MainframeDataError

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def ensure_utf8_streams() -> None:
    """
    Switch the console streams to UTF-8 on Windows so status emoji print.

    The streams are reconfigured in place, never re-wrapped, so calling this
    again from a nested main() is a no-op.
    """
    if sys.platform != "win32":
        return
    for stream in (sys.stdout, sys.stderr):
        if isinstance(stream, io.TextIOWrapper) and stream.encoding.lower() != "utf-8":
            stream.reconfigure(encoding="utf-8", errors="replace")


def configure_logging(verbosity: int = 0, level: str | None = None) -> None:
    """
    Configure the root logger once for a command run.

    Args:
        verbosity: number of -v flags (0 WARNING, 1 INFO, 2+ DEBUG)
        level: explicit level name; wins over verbosity
    """
    if level:
        resolved = getattr(logging, level.upper())
    elif verbosity >= 2:
        resolved = logging.DEBUG
    elif verbosity == 1:
        resolved = logging.INFO
    else:
        resolved = logging.WARNING
    logging.basicConfig(level=resolved, format=LOG_FORMAT, stream=sys.stderr, force=True)


def add_logging_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="increase log detail (-v INFO, -vv DEBUG)",
    )
    parser.add_argument("--log-level", choices=LOG_LEVELS, help="explicit log level")


def status(message: str) -> None:
    """Human-facing status line on stderr."""
    print(message, file=sys.stderr)


def report_error(error: BaseException) -> None:
    if isinstance(error, MainframeDataError):
        label = type(error).__name__
        if error.file_status:
            label += f" [status {error.file_status}]"
        status(f"❌ {label}: {error}")
    else:
        status(f"❌ I/O error: {error}")


def guarded(handler: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Run a command handler and map toolkit and OS errors to exit codes."""
    try:
        return handler(args)
    except MainframeDataError as e:
        logger.debug("command failed", exc_info=True)
        report_error(e)
        return e.exit_code
    except OSError as e:
        logger.debug("command failed", exc_info=True)
        report_error(e)
        return EXIT_CORRUPTION


def parse_arguments(
    parser: argparse.ArgumentParser, argv: list[str] | None
) -> argparse.Namespace | int:
    """Parse argv; returns the exit code instead of raising SystemExit."""
    try:
        return parser.parse_args(argv)
    except SystemExit as e:
        code = e.code
        if code is None:
            return EXIT_OK
        return code if isinstance(code, int) else EXIT_USAGE


def run_cli(parser: argparse.ArgumentParser, argv: list[str] | None) -> int:
    """Standard main() body for a command with subcommand handlers."""
    ensure_utf8_streams()
    args = parse_arguments(parser, argv)
    if isinstance(args, int):
        return args
    configure_logging(getattr(args, "verbose", 0), getattr(args, "log_level", None))
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_usage(sys.stderr)
        status(f"❌ {parser.prog}: a command is required")
        return EXIT_USAGE
    return guarded(handler, args)

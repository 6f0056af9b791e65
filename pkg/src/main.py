"""
Command-Line Entry Point

This is the main entry point of the multidre command. It builds the parser,
resolves settings, dispatches to the subcommand handler and maps errors to
exit codes: 0 success, 1 invalid input or usage, 2 numerical abort.
"""

import argparse
import platform
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from src import __version__
from src.cli import COMMAND_GROUPS
from src.cli.common import add_run_flags, apply_command_defaults, output_dir, settings_overrides
from src.config import Settings, load_settings
from src.exceptions import DataFileError, MultiDreError, NumericalAbortError, UsageError
from src.schemas.reports import ErrorReport
from src.utils.data_io import dumps, write_json

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORT = 2

VERSIONED_PACKAGES = ("numpy", "scipy", "scikit-learn", "pydantic", "pydantic-settings", "loguru", "orjson")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting with 2."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -----------------------------------------------------------------------------
# Parser Factory
# -----------------------------------------------------------------------------

def build_parser() -> CliParser:
    """
    Parser with one subcommand per registered handler.

    Returns:
        CliParser
    """
    parser = CliParser(prog="multidre", description="Multi-distribution density ratio estimation")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="COMMAND")
    subparsers.required = True
    for group in COMMAND_GROUPS:
        group.register(subparsers)
    for sub in subparsers.choices.values():
        add_run_flags(sub)
    return parser


# -----------------------------------------------------------------------------
# Run Record
# -----------------------------------------------------------------------------

def package_versions() -> Dict[str, str]:
    versions = {"multidre": __version__, "python": platform.python_version()}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_run_record(settings: Settings, subcommand: str, argv: Sequence[str], wall_time: float) -> Path:
    """run.json: resolved config, seed, versions and wall time."""
    return write_json(
        output_dir(settings) / "run.json",
        {
            "command": subcommand,
            "argv": list(argv),
            "config": settings.model_dump(mode="json"),
            "seed": settings.seed,
            "versions": package_versions(),
            "wall_time": wall_time,
        },
    )


def configure_logging(level: str) -> None:
    logger.remove()
    logger.add(sys.stderr, level=level)


def _error_report(error: Exception, exit_code: int) -> ErrorReport:
    return ErrorReport(
        error=str(error),
        type=type(error).__name__,
        exit_code=exit_code,
        path=error.path if isinstance(error, DataFileError) else None,
        step=error.step if isinstance(error, NumericalAbortError) else None,
    )


def _fail(error: Exception, exit_code: int) -> int:
    logger.error(f"{type(error).__name__}: {error}")
    sys.stdout.write(dumps(_error_report(error, exit_code).model_dump(mode="json")).decode() + "\n")
    sys.stdout.flush()
    return exit_code


# -----------------------------------------------------------------------------
# Dispatch
# -----------------------------------------------------------------------------

def parse_and_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv: Arguments without the program name; sys.argv[1:] when omitted

    Returns:
        Exit code
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        return _fail(e, EXIT_INVALID)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        settings = load_settings(args.config, settings_overrides(args))
        settings = apply_command_defaults(settings, getattr(args, "command_defaults", None))
        configure_logging(settings.log_level)

        start = time.perf_counter()
        doc: Any = args.handler(args, settings)
        wall_time = time.perf_counter() - start

        write_run_record(settings, args.subcommand, argv, wall_time)
        sys.stdout.write(dumps(doc).decode() + "\n")
        sys.stdout.flush()
        logger.info(f"{args.subcommand} finished in {wall_time:.2f}s")
        return EXIT_OK
    except NumericalAbortError as e:
        return _fail(e, EXIT_ABORT)
    except (MultiDreError, ValidationError) as e:
        return _fail(e, EXIT_INVALID)


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()

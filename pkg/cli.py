"""
BaZi persona engine command line.

Builds Four Pillars charts, interprets them, renders persona prompts and runs
the multiple-choice benchmark with its shuffled-birthday control.
"""

import argparse
import asyncio
import dataclasses
import importlib
import sys
from typing import List, Optional

import structlog
from dotenv import load_dotenv

from config import LATE_ZI_POLICIES, LOG_LEVELS, SOLAR_TIME_MODES, GlobalConfig, load_config
from errors import BaziError
from utils.log import configure_logging

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# Subcommand modules, each exposing setup(subparsers)
COMMANDS = [
    "commands.chart",
    "commands.analyze",
    "commands.cycles",
    "commands.persona",
    "commands.solar_terms",
    "commands.validate",
    "commands.import_raw",
    "commands.eval",
    "commands.runs",
]

CONFIG_FIELDS = {f.name for f in dataclasses.fields(GlobalConfig)}


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so the central handler owns the exit code."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = ArgumentParser(prog="bazi", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--config", help="KEY=value settings file")
    parser.add_argument("--log-level", dest="log_level", choices=LOG_LEVELS)
    parser.add_argument("--late-zi", dest="late_zi_policy", choices=LATE_ZI_POLICIES,
                        help="day attribution for births 23:00-24:00 (default next_day)")
    parser.add_argument("--solar-time", dest="solar_time", choices=SOLAR_TIME_MODES,
                        help="clock correction applied to birth times (default apparent)")
    parser.add_argument("--template-version", dest="template_version")
    parser.add_argument("--reference-age", dest="reference_age", type=int,
                        help="age whose year is read when a question names no period")

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=ArgumentParser)
    subparsers.required = True
    for module_name in COMMANDS:
        importlib.import_module(module_name).setup(subparsers)
    return parser


def _flags(args: argparse.Namespace) -> dict:
    return {name: value for name, value in vars(args).items() if name in CONFIG_FIELDS}


def _report_error(error: BaziError) -> None:
    sys.stderr.write(f"error: {error.details()[0]}\n")
    for line in error.details()[1:]:
        sys.stderr.write(f"{line}\n")


def dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{e}\n")
        return EXIT_USAGE
    except SystemExit as e:
        # --help exits 0 through argparse
        return int(e.code or 0)

    try:
        config = load_config(args.config, _flags(args))
        configure_logging(config.log_level)
        return asyncio.run(args.handler(args, config))
    except BaziError as e:
        logger.debug("command_failed", command=args.command, error=type(e).__name__)
        _report_error(e)
        return e.exit_code
    except KeyboardInterrupt:
        sys.stderr.write("interrupted\n")
        return EXIT_FAILURE


def main() -> None:
    load_dotenv()
    sys.exit(dispatch())


if __name__ == "__main__":
    main()

"""
Command-line entry point for the MDCSA indoor-localisation toolkit.
Dispatches subcommands and maps failures to exit codes.
"""

from typing import List, Optional
import argparse
import logging
import sys

from app.api import evaluate, gait, medstate, preprocess, report, simulate, stats, train
from app.api.common import common_parser
from app.core.config import load_settings, parse_overrides
from app.core.errors import UsageError
from app.core.logs import setup_logging

logger = logging.getLogger(__name__)

COMMANDS = (simulate, preprocess, train, evaluate, gait, medstate, stats, report)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdcsa",
        description="Simulate, train and evaluate multimodal room-level localisation",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    parent = common_parser()
    for command in COMMANDS:
        command.register(subparsers, parent)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        int: 0 on success, 1 on a runtime failure, 2 on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        overrides = parse_overrides(args.set)
        if args.seed is not None:
            overrides["SEED"] = args.seed
        if args.jobs is not None:
            overrides["N_JOBS"] = args.jobs
        settings = load_settings(args.config, overrides)
    except ValueError as e:
        setup_logging()
        logger.error(str(e))
        return EXIT_FAILURE
    setup_logging(settings.LOG_LEVEL, settings.LOG_JSON)

    try:
        return args.handler(args, settings)
    except UsageError as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except (ValueError, RuntimeError, OSError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=settings.DEBUG)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

"""
`report`: combined room, hallway, transition, medication and statistics tables.
"""

from pathlib import Path
import argparse

from app.api.common import CommandRun, output_dir
from app.core.config import Settings
from app.services.reports import build_report


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("report", parents=[parent], help="Render every table from finished runs")
    parser.add_argument("runs", type=Path, nargs="+", help="Output directories of train, gait and medstate")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("report", args, settings)
    out = output_dir(args, settings, "report")
    written = build_report(args.runs, out, settings.ALPHA)
    command.finish(out, inputs=args.runs, outputs=written)
    print((out / "report.txt").read_text(), end="")
    return 0

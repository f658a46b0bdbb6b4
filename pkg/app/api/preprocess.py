"""
`preprocess`: window a simulated cohort.
"""

from pathlib import Path
import argparse

from app.api.common import CommandRun, output_dir
from app.core.config import Settings
from app.services.pipeline import preprocess_cohort


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("preprocess", parents=[parent], help="Impute, resample and window traces")
    parser.add_argument("--data", type=Path, required=True, help="Output directory of `simulate`")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("preprocess", args, settings)
    out = output_dir(args, settings, "preprocess")
    summary = preprocess_cohort(args.data, out, settings, settings.N_JOBS)
    command.finish(out, inputs=[args.data])
    for pid, counts in summary.items():
        print(f"{pid}: " + ", ".join(f"{n} {kind}" for kind, n in counts.items()) + " windows")
    return 0

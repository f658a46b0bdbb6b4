"""
`simulate`: generate and serialize a synthetic cohort.
"""

import argparse
import logging

from app.api.common import CommandRun, output_dir
from app.core.config import Settings
from app.services.simhome import generate_cohort, write_cohort

logger = logging.getLogger(__name__)


def positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("simulate", parents=[parent], help="Simulate a PD/HC cohort")
    parser.add_argument("--pairs", type=positive_int, default=None, help="PD/HC pairs (overrides SIM_N_PAIRS)")
    parser.add_argument("--days", type=positive_int, default=None, help="Days per participant (overrides SIM_DAYS)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("simulate", args, settings)
    out = output_dir(args, settings, "simulate")
    n_pairs = args.pairs or settings.SIM_N_PAIRS
    days = args.days or settings.SIM_DAYS

    cohort = generate_cohort(n_pairs, days, settings.SEED, settings)
    summary = write_cohort(cohort, out, settings.N_JOBS)
    command.finish(out)

    hours = settings.DAY_END_HOUR - settings.DAY_START_HOUR
    n_windows = sum(len(s.windows) for s in cohort.manifest.schedules.values())
    print(f"participants: {len(summary)}  days: {days}  hours/day: {hours}  schedule windows: {n_windows}")
    for pid, counts in summary.items():
        print(f"  {pid}: {counts['rssi_packets']} rssi packets, {counts['accel_samples']} accel samples")
    print(f"cohort written to {out}")
    return 0

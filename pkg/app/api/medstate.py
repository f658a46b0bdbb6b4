"""
`medstate`: leave-one-participant-out ON/OFF classification.
"""

from pathlib import Path
import argparse

from app.api.common import CommandRun, output_dir
from app.api.gait import GAIT_FEATURES
from app.core.config import Settings
from app.core.errors import UsageError
from app.models.schemas import FeatureSource, RandomForestParams
from app.services.gaitfeat import read_gait_rows
from app.services.medstate import (
    demographic_samples,
    gait_samples,
    med_reports_frame,
    run_med_protocol,
    write_med_reports,
)
from app.services.reports import MED_REPORTS, format_cell, mean_sd
from app.services.simhome import read_cohort_manifest


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("medstate", parents=[parent], help="Classify medication state")
    parser.add_argument("--source", choices=[s.value for s in FeatureSource], required=True)
    parser.add_argument("--gait", type=Path, help="Directory holding gait_features.csv (gait sources)")
    parser.add_argument("--data", type=Path, help="Directory holding cohort.json (demographic sources)")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("medstate", args, settings)
    source = FeatureSource(args.source)
    if source in (FeatureSource.GAIT_FROM_MODEL, FeatureSource.GAIT_FROM_TRUTH):
        if args.gait is None:
            raise UsageError(f"--source {source.value} needs --gait")
        samples, inputs = gait_samples(read_gait_rows(args.gait / GAIT_FEATURES)), [args.gait]
    else:
        if args.data is None:
            raise UsageError(f"--source {source.value} needs --data")
        manifest = read_cohort_manifest(args.data)
        include_updrs = source == FeatureSource.DEMOGRAPHIC
        samples, inputs = demographic_samples(manifest, include_updrs, settings), [args.data]

    params = RandomForestParams(n_trees=settings.MED_N_TREES, min_leaf=settings.MED_MIN_LEAF)
    reports = run_med_protocol(samples, source, params, settings.SEED, settings.N_JOBS)
    out = output_dir(args, settings, "medstate") / source.value
    out.mkdir(parents=True, exist_ok=True)
    write_med_reports(reports, out / MED_REPORTS)
    command.finish(out, inputs=inputs)

    print(med_reports_frame(reports).to_string(index=False))
    f1 = format_cell(*mean_sd([r.f1 for r in reports]))
    area = format_cell(*mean_sd([r.auroc for r in reports]))
    print(f"{source.value}: F1 {f1}  AUROC {area}")
    return 0

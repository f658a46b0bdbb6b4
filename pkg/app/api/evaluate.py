"""
`evaluate`: re-score trained fold checkpoints on their test participants.
"""

from pathlib import Path
import argparse
import logging

from app.api.common import CommandRun, add_protocol_arguments, output_dir
from app.core.artifacts import write_table
from app.core.config import Settings
from app.ml.crf import format_transitions
from app.models.schemas import FoldReport, ProtocolName, Variant
from app.services.metrics import hallway_metrics, weighted_metrics
from app.services.pipeline import load_window_manifest
from app.services.protocols import (
    build_folds,
    load_fold_model,
    load_group,
    predict_windows,
    predictions_frame,
    reports_frame,
    run_dir_for,
)

logger = logging.getLogger(__name__)


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("evaluate", parents=[parent], help="Re-predict test folds from checkpoints")
    parser.add_argument("--run", type=Path, required=True, help="Output directory of `train`")
    parser.add_argument("--data", type=Path, required=True, help="Output directory of `preprocess`")
    add_protocol_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("evaluate", args, settings)
    protocol, variant = ProtocolName(args.protocol), Variant(args.variant)
    out = output_dir(args, settings, "evaluate")
    run_dir = run_dir_for(args.run, protocol, variant)
    manifest = load_window_manifest(args.data)

    reports = []
    for spec in build_folds(protocol, manifest, settings.BUDGET_WINDOWS):
        loaded = load_fold_model(run_dir, spec.fold_id, variant)
        test = load_group(args.data, spec.test_participants)
        predictions = predict_windows(loaded, test)
        write_table(predictions_frame(test, predictions), out / f"predictions_{spec.fold_id}.csv.gz", "predictions")
        if variant.is_network:
            (out / f"crf_transitions_{spec.fold_id}.txt").write_text(format_transitions(loaded.model.crf.transitions))
        precision, f1 = weighted_metrics(predictions, test.labels)
        hall_precision, hall_f1 = hallway_metrics(predictions, test.labels)
        reports.append(FoldReport(
            protocol=protocol, variant=variant, fold_id=spec.fold_id,
            weighted_precision=precision, weighted_f1=f1,
            hallway_precision=hall_precision, hallway_f1=hall_f1,
        ))
        logger.info(f"Evaluated fold {spec.fold_id}: weighted F1 {f1:.4f}")

    table = reports_frame(reports)
    write_table(table, out / "evaluation.csv", "evaluation")
    command.finish(out, inputs=[run_dir, args.data])
    print(table.to_string(index=False))
    return 0

"""
`train`: run one cross-validation protocol for one model variant.
"""

from pathlib import Path
import argparse

from app.api.common import CommandRun, add_protocol_arguments, output_dir
from app.core.config import Settings
from app.models.schemas import ProtocolName, Variant
from app.services.protocols import reports_frame, run_dir_for, run_protocol
from app.services.reports import format_cell, mean_sd


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("train", parents=[parent], help="Train and test every fold of a protocol")
    parser.add_argument("--data", type=Path, required=True, help="Output directory of `preprocess`")
    add_protocol_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("train", args, settings)
    protocol, variant = ProtocolName(args.protocol), Variant(args.variant)
    out = output_dir(args, settings, "train")
    reports = run_protocol(protocol, variant, args.data, out, settings, settings.N_JOBS)
    run_dir = run_dir_for(out, protocol, variant)
    command.finish(run_dir, inputs=[args.data])

    print(reports_frame(reports).to_string(index=False))
    precision = format_cell(*mean_sd([r.weighted_precision for r in reports]))
    f1 = format_cell(*mean_sd([r.weighted_f1 for r in reports]))
    print(f"{protocol.value} {variant.value}: precision {precision}  F1 {f1}")
    return 0

"""
`gait`: room-to-room transition features from ground truth or from a trained model.
"""

from pathlib import Path
from typing import Dict, List
import argparse
import logging

import pandas as pd

from app.api.common import CommandRun, add_protocol_arguments, output_dir
from app.core.config import Settings
from app.core.errors import UsageError
from app.models.records import RoomSequence
from app.models.schemas import Group, ProtocolName, Variant
from app.services.gaitfeat import (
    aggregate_features,
    extract_transitions,
    mean_transition_table,
    transitions_frame,
    write_gait_rows,
    write_transitions,
)
from app.services.pipeline import load_window_manifest
from app.services.protocols import build_folds, fold_gait_rows, load_fold_model, run_dir_for
from app.services.reports import GAIT_TRANSITIONS, TRUTH_SOURCE
from app.services.simhome import read_cohort_manifest, read_truth

logger = logging.getLogger(__name__)

GAIT_FEATURES = "gait_features.csv"


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("gait", parents=[parent], help="Extract in-home gait features")
    parser.add_argument("--source", choices=["truth", "model"], required=True)
    parser.add_argument("--sim", type=Path, help="Output directory of `simulate` (truth source)")
    parser.add_argument("--run", type=Path, help="Output directory of `train` (model source)")
    parser.add_argument("--data", type=Path, help="Output directory of `preprocess` (model source)")
    add_protocol_arguments(parser, required=False)
    parser.set_defaults(handler=run)


def _from_truth(sim_dir: Path, settings: Settings):
    manifest = read_cohort_manifest(sim_dir)
    rows, frames = [], []
    for pid in manifest.participants(Group.PD):
        sequence = RoomSequence.from_frame(pid, read_truth(sim_dir, pid, manifest.days))
        transitions = extract_transitions(sequence, settings.tick_ms)
        schedule = manifest.schedules[pid]
        rows.extend(aggregate_features(pid, transitions, schedule, manifest.days, settings))
        frames.append(transitions_frame(pid, transitions, schedule, settings))
    return rows, frames


def _from_model(args: argparse.Namespace, settings: Settings):
    protocol, variant = ProtocolName(args.protocol), Variant(args.variant)
    manifest = load_window_manifest(args.data)
    run_dir = run_dir_for(args.run, protocol, variant)
    folds = sorted(build_folds(protocol, manifest, settings.BUDGET_WINDOWS), key=lambda f: f.fold_id)

    # each PD participant is predicted by the first fold (by id) that tests them
    assignment: Dict[str, List[str]] = {}
    for pid in manifest.participants(Group.PD):
        fold = next((f for f in folds if pid in f.test_participants), None)
        if fold is None:
            logger.warning(f"No {protocol.value} fold tests {pid}; skipping")
            continue
        assignment.setdefault(fold.fold_id, []).append(pid)

    rows, frames = [], []
    for fold_id, participants in sorted(assignment.items()):
        loaded = load_fold_model(run_dir, fold_id, variant)
        fold_rows, fold_frame = fold_gait_rows(loaded, args.data, manifest, participants, settings)
        rows.extend(fold_rows)
        frames.append(fold_frame)
    return rows, frames


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("gait", args, settings)
    if args.source == "truth":
        if args.sim is None:
            raise UsageError("--source truth needs --sim")
        name, inputs = TRUTH_SOURCE, [args.sim]
        rows, frames = _from_truth(args.sim, settings)
    else:
        if None in (args.run, args.data, args.protocol, args.variant):
            raise UsageError("--source model needs --run, --data, --protocol and --variant")
        name = f"{args.protocol}_{args.variant}"
        inputs = [run_dir_for(args.run, ProtocolName(args.protocol), Variant(args.variant)), args.data]
        rows, frames = _from_model(args, settings)

    out = output_dir(args, settings, "gait") / name
    out.mkdir(parents=True, exist_ok=True)
    transitions = pd.concat(frames, ignore_index=True) if frames else transitions_frame("", [], None, settings)
    write_gait_rows(rows, out / GAIT_FEATURES)
    write_transitions(transitions, out / GAIT_TRANSITIONS)
    command.finish(out, inputs=inputs)

    table = mean_transition_table({name: transitions})
    print(table[["model", "pair", "count", "cell"]].to_string(index=False))
    print(f"{len(rows)} feature rows written to {out}")
    return 0

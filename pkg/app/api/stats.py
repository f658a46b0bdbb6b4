"""
`stats`: Friedman, Holm-corrected pairwise Wilcoxon and critical-difference ranks across variants.
"""

from pathlib import Path
import argparse

from app.api.common import CommandRun, output_dir
from app.core.artifacts import write_table
from app.core.config import Settings
from app.core.errors import MissingArtifactError
from app.services.reports import check_fold_sets, collect_runs, stats_section


def register(subparsers, parent: argparse.ArgumentParser) -> None:
    parser = subparsers.add_parser("stats", parents=[parent], help="Compare variants across folds")
    parser.add_argument("runs", type=Path, nargs="+", help="Directories holding fold_reports.csv files")
    parser.add_argument("--metric", default="weighted_f1",
                        choices=["weighted_f1", "weighted_precision", "hallway_f1", "hallway_precision"])
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, settings: Settings) -> int:
    command = CommandRun("stats", args, settings)
    runs = collect_runs(args.runs)
    if not runs:
        raise MissingArtifactError("No fold reports found; run `train` first")
    check_fold_sets(runs)
    text, plot_data = stats_section(runs, settings.ALPHA, args.metric)
    out = output_dir(args, settings, "stats")
    (out / "stats.txt").write_text(text)
    write_table(plot_data, out / "cd_plot_data.csv", "cd-plot-data")
    command.finish(out, inputs=args.runs)
    print(text, end="")
    return 0

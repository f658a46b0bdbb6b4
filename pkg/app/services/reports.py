"""
Report tables combining training, gait and medication runs.
Renders aligned text and comma-separated tables, plus the cross-variant statistics section.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from app.core.artifacts import read_table, write_table
from app.core.errors import InconsistentRunsError, MissingArtifactError, UndefinedStatisticError
from app.models.schemas import PAIR_LABELS, FoldReport, MedFoldReport, ProtocolName, Variant
from app.services.gaitfeat import mean_transition_table, on_off_means, read_transitions
from app.services.protocols import FOLD_REPORTS, read_fold_reports
from app.services.stats import (
    critical_difference_ranks,
    friedman_test,
    holm_correction,
    pairwise_wilcoxon,
    rank_plot_data,
    render_rank_diagram,
    wilcoxon_signed_rank,
)

logger = logging.getLogger(__name__)

GAIT_TRANSITIONS = "gait_transitions.csv.gz"
MED_REPORTS = "med_reports.csv"
TRUTH_SOURCE = "truth"

RunKey = Tuple[ProtocolName, Variant]


def mean_sd(values: Sequence[Optional[float]]) -> Tuple[Optional[float], Optional[float]]:
    """Mean and population sd over the defined values; (None, None) when there are none."""
    defined = [v for v in values if v is not None and not np.isnan(v)]
    if not defined:
        return None, None
    return float(np.mean(defined)), float(np.std(defined))


def format_cell(mean: Optional[float], sd: Optional[float], scale: float = 100.0) -> str:
    if mean is None:
        return "N/A"
    return f"{mean * scale:.2f} ({sd * scale:.2f})"


def collect_runs(run_dirs: Iterable[Path]) -> Dict[RunKey, List[FoldReport]]:
    """Every fold-report table found under the given directories, keyed by (protocol, variant)."""
    runs: Dict[RunKey, List[FoldReport]] = {}
    for root in run_dirs:
        for path in sorted(Path(root).rglob(FOLD_REPORTS)):
            reports = read_fold_reports(path)
            if not reports:
                continue
            key = (reports[0].protocol, reports[0].variant)
            if key in runs:
                raise InconsistentRunsError(f"{key[0].value}/{key[1].value} appears in more than one run directory")
            runs[key] = sorted(reports, key=lambda r: r.fold_id)
    return runs


def check_fold_sets(runs: Dict[RunKey, List[FoldReport]]) -> None:
    """All variants of one protocol must cover the same folds."""
    by_protocol: Dict[ProtocolName, Dict[Variant, set]] = {}
    for (protocol, variant), reports in runs.items():
        by_protocol.setdefault(protocol, {})[variant] = {r.fold_id for r in reports}
    problems = []
    for protocol, variants in by_protocol.items():
        union = set().union(*variants.values())
        for variant, folds in sorted(variants.items(), key=lambda kv: kv[0].value):
            missing = sorted(union - folds)
            if missing:
                problems.append(f"{protocol.value}/{variant.value} lacks folds {missing}")
    if problems:
        raise InconsistentRunsError("; ".join(problems))


def _ordered(runs: Dict[RunKey, List[FoldReport]]) -> List[RunKey]:
    protocols = list(ProtocolName)
    variants = list(Variant)
    return sorted(runs, key=lambda k: (protocols.index(k[0]), variants.index(k[1])))


def room_table(runs: Dict[RunKey, List[FoldReport]]) -> pd.DataFrame:
    """Protocol x variant rows: weighted precision/F1 and medication F1/AUROC, mean (sd) x100."""
    records = []
    for key in _ordered(runs):
        reports = runs[key]
        row = {"protocol": key[0].value, "variant": key[1].value, "folds": len(reports)}
        for column, field in (("precision", "weighted_precision"), ("f1", "weighted_f1"),
                              ("med_f1", "med_f1"), ("med_auroc", "med_auroc")):
            row[column] = format_cell(*mean_sd([getattr(r, field) for r in reports]))
        records.append(row)
    return pd.DataFrame.from_records(
        records, columns=["protocol", "variant", "folds", "precision", "f1", "med_f1", "med_auroc"]
    )


def hallway_table(runs: Dict[RunKey, List[FoldReport]]) -> pd.DataFrame:
    """Hallway-only precision/F1 for the limited-data protocols."""
    limited = (ProtocolName.LOO_HC, ProtocolName.LOO_PD, ProtocolName.FOUR_MIN_HC, ProtocolName.FOUR_MIN_PD)
    records = []
    for key in _ordered(runs):
        if key[0] not in limited:
            continue
        reports = runs[key]
        records.append({
            "protocol": key[0].value,
            "variant": key[1].value,
            "precision": format_cell(*mean_sd([r.hallway_precision for r in reports])),
            "f1": format_cell(*mean_sd([r.hallway_f1 for r in reports])),
        })
    return pd.DataFrame.from_records(records, columns=["protocol", "variant", "precision", "f1"])


def stats_section(runs: Dict[RunKey, List[FoldReport]], alpha: float = 0.05, metric: str = "weighted_f1"):
    """
    Friedman, Holm-corrected pairwise Wilcoxon and critical-difference ranks per protocol.

    Returns:
        (text, plot_data): Rendered section and the rank/clique rows of every protocol
    """
    lines: List[str] = []
    frames: List[pd.DataFrame] = []
    protocols = sorted({k[0] for k in runs}, key=list(ProtocolName).index)
    for protocol in protocols:
        keys = [k for k in _ordered(runs) if k[0] == protocol]
        lines.append(f"== {protocol.value} ({metric}) ==")
        if len(keys) < 2:
            lines.append("Statistics skipped: only one variant.")
            continue
        folds = sorted({r.fold_id for r in runs[keys[0]]})
        if len(folds) < 2:
            lines.append("Statistics skipped: only one fold.")
            continue
        models = [k[1].value for k in keys]
        matrix = np.array([
            [getattr({r.fold_id: r for r in runs[k]}[f], metric) for k in keys]
            for f in folds
        ])
        friedman = friedman_test(matrix)
        lines.append(f"Friedman chi2 = {friedman.statistic:.4f}, p = {friedman.p_value:.4f}")
        pairwise = pairwise_wilcoxon(matrix, models)
        reject, adjusted = holm_correction(pairwise["p_value"].tolist(), alpha)
        pairwise["p_holm"] = adjusted
        pairwise["significant"] = reject
        lines.append(pairwise.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
        diagram = critical_difference_ranks(matrix, models, reject)
        lines.append(render_rank_diagram(diagram).rstrip("\n"))
        plot = rank_plot_data(diagram)
        plot.insert(0, "protocol", protocol.value)
        frames.append(plot)
    if len({k[1] for k in runs}) < 2:
        lines = ["Statistics skipped: only one variant."]
    plot_data = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(
        columns=["protocol", "model", "average_rank", "clique"]
    )
    return "\n".join(lines) + "\n", plot_data


def collect_transitions(run_dirs: Iterable[Path]) -> Dict[str, pd.DataFrame]:
    """Gait transition files keyed by the name of their directory (truth, or a model run)."""
    found: Dict[str, pd.DataFrame] = {}
    for root in run_dirs:
        for path in sorted(Path(root).rglob(GAIT_TRANSITIONS)):
            found[path.parent.name] = read_transitions(path)
    return dict(sorted(found.items(), key=lambda kv: (kv[0] != TRUTH_SOURCE, kv[0])))


def transition_table(transitions: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    reference = TRUTH_SOURCE if TRUTH_SOURCE in transitions else None
    table = mean_transition_table(transitions, reference=reference)
    table["offset"] = [
        "N/A" if np.isnan(v) else f"{v:.2f}" for v in table["offset_s"].to_numpy(dtype=float)
    ]
    return table[["model", "pair", "count", "cell", "offset"]]


def on_off_table(transitions: Dict[str, pd.DataFrame]) -> pd.DataFrame:
    """Per source and pair: one-sided Wilcoxon of per-participant OFF vs ON mean durations."""
    records = []
    for source, df in transitions.items():
        for pair in PAIR_LABELS.values():
            means = on_off_means(df, pair)
            row = {"source": source, "pair": pair, "n": len(means),
                   "off_mean": "N/A", "on_mean": "N/A", "W": "N/A", "z": "N/A", "p": "N/A"}
            if means:
                off = [m[1] for m in means]
                on = [m[2] for m in means]
                row["off_mean"], row["on_mean"] = f"{np.mean(off):.2f}", f"{np.mean(on):.2f}"
                try:
                    result = wilcoxon_signed_rank(list(zip(off, on)), alternative="greater")
                    row.update(W=f"{result.statistic:.1f}", z=f"{result.z:.3f}", p=f"{result.p_value:.3f}")
                except UndefinedStatisticError:
                    logger.info(f"ON/OFF test undefined for {source} {pair}: no nonzero differences")
            records.append(row)
    return pd.DataFrame.from_records(
        records, columns=["source", "pair", "n", "off_mean", "on_mean", "W", "z", "p"]
    )


def collect_med_reports(run_dirs: Iterable[Path]) -> List[MedFoldReport]:
    reports: List[MedFoldReport] = []
    for root in run_dirs:
        for path in sorted(Path(root).rglob(MED_REPORTS)):
            df = read_table(path, "med-reports", dtype={"fold_id": str})
            df = df.astype(object).where(df.notna(), None)
            reports.extend(MedFoldReport(**record) for record in df.to_dict(orient="records"))
    return reports


def med_table(reports: Sequence[MedFoldReport]) -> pd.DataFrame:
    records = []
    sources = sorted({r.source for r in reports}, key=lambda s: s.value)
    for source in sources:
        chosen = [r for r in reports if r.source == source]
        records.append({
            "source": source.value,
            "folds": len(chosen),
            "f1": format_cell(*mean_sd([r.f1 for r in chosen])),
            "auroc": format_cell(*mean_sd([r.auroc for r in chosen])),
        })
    return pd.DataFrame.from_records(records, columns=["source", "folds", "f1", "auroc"])


def _section(title: str, df: pd.DataFrame) -> str:
    body = df.to_string(index=False) if len(df) else "(no rows)"
    return f"## {title}\n{body}\n"


def build_report(run_dirs: Sequence[Path], out_dir: Path, alpha: float = 0.05) -> List[Path]:
    """
    Render every table available under `run_dirs` into `out_dir`.

    Raises:
        MissingArtifactError: No fold reports under any run directory
        InconsistentRunsError: Variants of a protocol disagree on folds

    Returns:
        list: Written files
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = collect_runs(run_dirs)
    if not runs:
        raise MissingArtifactError(f"No {FOLD_REPORTS} under {[str(p) for p in run_dirs]}; run `train` first")
    check_fold_sets(runs)

    tables = {"rooms": room_table(runs), "hallway": hallway_table(runs)}
    transitions = collect_transitions(run_dirs)
    if transitions:
        tables["transitions"] = transition_table(transitions)
        tables["on_off"] = on_off_table(transitions)
    med = collect_med_reports(run_dirs)
    if med:
        tables["medication"] = med_table(med)
    stats_text, plot_data = stats_section(runs, alpha)

    written = []
    for name, df in tables.items():
        written.append(write_table(df, out_dir / f"{name}.csv", f"report-{name}"))
    written.append(write_table(plot_data, out_dir / "cd_plot_data.csv", "cd-plot-data"))
    titles = {
        "rooms": "Room-level localisation and medication state",
        "hallway": "Hallway precision and F1",
        "transitions": "Room-to-room transition duration (s)",
        "on_off": "OFF vs ON transition duration (one-sided Wilcoxon)",
        "medication": "Medication-state classification",
    }
    text = "".join(_section(titles[name], df) + "\n" for name, df in tables.items())
    text += f"## Statistics\n{stats_text}"
    path = out_dir / "report.txt"
    path.write_text(text)
    written.append(path)
    logger.info(f"Wrote report with {len(tables)} table(s) to {out_dir}")
    return written

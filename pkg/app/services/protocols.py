"""
Cross-validation protocols.
Builds folds, trains and evaluates one model per fold, and persists fold artifacts
so an interrupted run resumes where it stopped.
"""

from pathlib import Path
from typing import List, Optional, Sequence
import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.core.artifacts import read_table, write_table
from app.core.config import Settings, settings as default_settings
from app.core.errors import InfeasibleProtocolError, MissingArtifactError
from app.core.seeding import sub_seed
from app.ml.crf import format_transitions
from app.ml.forest import flatten_windows, rf_grid_search, rf_predict, window_labels
from app.ml.model_loader import LoadedModel, checkpoint_path, load_checkpoint, save_checkpoint
from app.models.records import WindowSet
from app.models.schemas import (
    ROOMS,
    CohortManifest,
    FeatureSource,
    FoldReport,
    FoldSpec,
    Group,
    ProtocolName,
    RandomForestParams,
    TrainConfig,
    Variant,
)
from app.services.gaitfeat import (
    aggregate_features,
    extract_transitions,
    predictions_to_sequence,
    transitions_frame,
    write_gait_rows,
    write_transitions,
)
from app.services.medstate import gait_samples, run_med_protocol
from app.services.metrics import hallway_metrics, weighted_metrics
from app.services.pipeline import (
    ANNOTATED,
    CONTINUOUS,
    apply_normalizer,
    fit_normalizer,
    load_participant_windows,
    load_window_manifest,
    select_top_aps,
)
from app.services.training import grid_search, predict_rooms, prepare_windows, split_train_val

logger = logging.getLogger(__name__)

FOLD_REPORT = "fold_report.json"
FOLD_REPORTS = "fold_reports.csv"
PREDICTIONS = "predictions.csv.gz"
CRF_TABLE = "crf_transitions.txt"
BUDGETED = (ProtocolName.FOUR_MIN_HC, ProtocolName.FOUR_MIN_PD)
FOLD_REPORT_COLUMNS = list(FoldReport.model_fields)


def build_folds(protocol: ProtocolName, manifest: CohortManifest, budget: int = 48) -> List[FoldSpec]:
    """
    Fold definitions of a protocol. Test participants are always the PD
    participants outside the training set.

    Raises:
        InfeasibleProtocolError: Leave-one-out protocols on fewer than two pairs
    """
    pd_ids = sorted(manifest.participants(Group.PD))
    hc_ids = sorted(manifest.participants(Group.HC))
    if not pd_ids or not hc_ids:
        raise InfeasibleProtocolError("cohort needs both PD participants and healthy controls")
    if protocol == ProtocolName.ALL_HC:
        return [FoldSpec(fold_id="all", train_participants=hc_ids, test_participants=pd_ids)]
    if manifest.n_pairs < 2:
        raise InfeasibleProtocolError(f"{protocol.value} needs at least 2 pairs, cohort has {manifest.n_pairs}")
    limit = budget if protocol in BUDGETED else None
    if protocol in (ProtocolName.LOO_HC, ProtocolName.FOUR_MIN_HC):
        return [
            FoldSpec(fold_id=h, train_participants=[h], test_participants=pd_ids, budget_windows=limit)
            for h in hc_ids
        ]
    return [
        FoldSpec(fold_id=p, train_participants=[p], test_participants=[q for q in pd_ids if q != p], budget_windows=limit)
        for p in pd_ids
    ]


def apply_budget(ws: WindowSet, budget: Optional[int]) -> WindowSet:
    """The first `budget` windows by start time; unchanged when no budget is set."""
    if budget is None or len(ws) <= budget:
        return ws
    order = np.argsort(ws.start_ms, kind="stable")[:budget]
    return ws.subset(np.sort(order))


def load_group(windows_dir: Path, participants: Sequence[str], kind: str = ANNOTATED) -> WindowSet:
    sets = [load_participant_windows(windows_dir, p, kind) for p in participants]
    nonempty = [s for s in sets if len(s)]
    if not nonempty:
        raise MissingArtifactError(f"No {kind} windows for participants {list(participants)}")
    return WindowSet.concat(nonempty)


def predict_windows(loaded: LoadedModel, ws: WindowSet) -> np.ndarray:
    """Per-step room predictions (W, T) of a fold model; forests broadcast one label per window."""
    prepared = prepare_windows(ws, loaded.variant, loaded.top_aps, loaded.normalizer)
    if loaded.variant.is_network:
        return predict_rooms(loaded.model, prepared)
    if len(prepared) == 0:
        return np.zeros((0, ws.labels.shape[1]), dtype=np.int64)
    per_window = rf_predict(loaded.model, flatten_windows(prepared))
    return np.repeat(np.asarray(per_window, dtype=np.int64)[:, None], ws.labels.shape[1], axis=1)


def predictions_frame(ws: WindowSet, predictions: np.ndarray) -> pd.DataFrame:
    """Long format: one row per window step."""
    W, T = ws.labels.shape
    return pd.DataFrame({
        "participant": np.repeat(ws.participants.astype(str), T),
        "start_ms": np.repeat(ws.start_ms, T),
        "step": np.tile(np.arange(T), W),
        "truth": ws.labels.ravel(),
        "pred": np.asarray(predictions).ravel(),
    })


def fold_dir(run_dir: Path, fold_id: str) -> Path:
    return Path(run_dir) / f"fold_{fold_id}"


def _train_network(
    spec: FoldSpec, protocol: ProtocolName, variant: Variant, train: WindowSet, config: Settings, out: Path
) -> LoadedModel:
    train_cfg = TrainConfig.from_settings(config)
    top_aps = select_top_aps(train, config.TOP_AP_COUNT, config.RSSI_MISSING_DBM)
    fit_ws, val_ws = split_train_val(train, train_cfg.val_fraction)
    masked = prepare_windows(fit_ws, variant, top_aps)
    normalizer = fit_normalizer(masked)
    fit_ws = apply_normalizer(normalizer, masked)
    val_ws = prepare_windows(val_ws, variant, top_aps, normalizer)
    logger.info(
        f"Fold {spec.fold_id}: normaliser, grid search and early stopping on {len(fit_ws)}+{len(val_ws)} windows",
        extra={
            "protocol": protocol.value, "variant": variant.value, "fold": spec.fold_id,
            "train_participants": spec.train_participants, "n_fit": len(fit_ws), "n_val": len(val_ws),
        },
    )
    grid = grid_search(train_cfg, [(fit_ws, val_ws)], keys=(protocol.value, variant.value, spec.fold_id))
    result = grid.results[0]
    save_checkpoint(out, variant, result.model, normalizer, top_aps, grid.best.model_dump())
    (out / CRF_TABLE).write_text(format_transitions(result.model.crf.transitions))
    return LoadedModel(variant=variant, model=result.model, normalizer=normalizer, top_aps=top_aps,
                       hyperparams=grid.best.model_dump(), config=result.model.config)


def _train_forest(
    spec: FoldSpec, protocol: ProtocolName, variant: Variant, train: WindowSet, config: Settings, out: Path
) -> LoadedModel:
    top_aps = select_top_aps(train, config.TOP_AP_COUNT, config.RSSI_MISSING_DBM)
    masked = prepare_windows(train, variant, top_aps)
    normalizer = fit_normalizer(masked)
    X = flatten_windows(apply_normalizer(normalizer, masked))
    y = window_labels(train.labels, len(ROOMS))
    logger.info(
        f"Fold {spec.fold_id}: forest grid search on {len(train)} windows",
        extra={"protocol": protocol.value, "variant": variant.value, "fold": spec.fold_id,
               "train_participants": spec.train_participants, "n_fit": len(train)},
    )
    forest, params = rf_grid_search(
        X, y, config.RF_GRID_TREES, config.RF_GRID_MIN_LEAF, config.RF_GRID_WARM_START,
        seed=sub_seed(config.SEED, "bootstrap", protocol.value, variant.value, spec.fold_id),
        cv_folds=config.RF_CV_FOLDS,
    )
    save_checkpoint(out, variant, forest, normalizer, top_aps, params.model_dump())
    return LoadedModel(variant=variant, model=forest, normalizer=normalizer, top_aps=top_aps,
                       hyperparams=params.model_dump())


def fold_gait_rows(
    loaded: LoadedModel,
    windows_dir: Path,
    manifest: CohortManifest,
    participants: Sequence[str],
    config: Settings = default_settings,
):
    """Gait rows and transitions derived from a model's continuous predictions for PD participants."""
    rows, frames = [], []
    for pid in participants:
        if manifest.profile(pid).group != Group.PD:
            continue
        ws = load_participant_windows(windows_dir, pid, CONTINUOUS)
        sequence = predictions_to_sequence(pid, ws.start_ms, predict_windows(loaded, ws), config.tick_ms)
        transitions = extract_transitions(sequence, config.tick_ms)
        schedule = manifest.schedules.get(pid)
        rows.extend(aggregate_features(pid, transitions, schedule, manifest.days, config))
        frames.append(transitions_frame(pid, transitions, schedule, config))
    return rows, (pd.concat(frames, ignore_index=True) if frames else transitions_frame("", [], None, config))


def _med_columns(
    loaded: LoadedModel, spec: FoldSpec, windows_dir: Path, manifest: CohortManifest, config: Settings, out: Path
):
    rows, transitions = fold_gait_rows(loaded, windows_dir, manifest, spec.test_participants, config)
    write_gait_rows(rows, out / "fold_gait_features.csv")
    write_transitions(transitions, out / "fold_transitions.csv.gz")
    if len({r.participant for r in rows}) < 2:
        return None, None
    params = RandomForestParams(n_trees=config.MED_N_TREES, min_leaf=config.MED_MIN_LEAF)
    reports = run_med_protocol(gait_samples(rows), FeatureSource.GAIT_FROM_MODEL, params, config.SEED)
    aurocs = [r.auroc for r in reports if r.auroc is not None]
    return float(np.mean([r.f1 for r in reports])), (float(np.mean(aurocs)) if aurocs else None)


def run_fold(
    spec: FoldSpec,
    protocol: ProtocolName,
    variant: Variant,
    windows_dir: Path,
    run_dir: Path,
    config: Settings = default_settings,
) -> FoldReport:
    """
    Train, checkpoint and evaluate one fold; reuse its report if it already exists.

    Returns:
        FoldReport: Room-level and hallway metrics on the fold's PD test participants
    """
    out = fold_dir(run_dir, spec.fold_id)
    report_path = out / FOLD_REPORT
    if report_path.is_file():
        logger.info(f"Reusing finished fold {spec.fold_id} from {out}")
        return FoldReport.model_validate_json(report_path.read_text())
    out.mkdir(parents=True, exist_ok=True)
    manifest = load_window_manifest(windows_dir)

    train = apply_budget(load_group(windows_dir, spec.train_participants), spec.budget_windows)
    test = load_group(windows_dir, spec.test_participants)
    if variant.is_network:
        loaded = _train_network(spec, protocol, variant, train, config, out)
    else:
        loaded = _train_forest(spec, protocol, variant, train, config, out)

    logger.info(
        f"Fold {spec.fold_id}: testing on {len(test)} windows",
        extra={"protocol": protocol.value, "variant": variant.value, "fold": spec.fold_id,
               "test_participants": spec.test_participants, "n_test": len(test)},
    )
    predictions = predict_windows(loaded, test)
    write_table(predictions_frame(test, predictions), out / PREDICTIONS, "predictions")
    precision, f1 = weighted_metrics(predictions, test.labels)
    hall_precision, hall_f1 = hallway_metrics(predictions, test.labels)

    med_f1, med_auroc = None, None
    if config.FOLD_MED_COLUMNS:
        med_f1, med_auroc = _med_columns(loaded, spec, windows_dir, manifest, config, out)

    report = FoldReport(
        protocol=protocol,
        variant=variant,
        fold_id=spec.fold_id,
        weighted_precision=precision,
        weighted_f1=f1,
        hallway_precision=hall_precision,
        hallway_f1=hall_f1,
        med_f1=med_f1,
        med_auroc=med_auroc,
    )
    report_path.write_text(report.model_dump_json(indent=2) + "\n")
    logger.info(f"Fold {spec.fold_id}: weighted F1 {f1:.4f}, precision {precision:.4f}")
    return report


def run_dir_for(out_dir: Path, protocol: ProtocolName, variant: Variant) -> Path:
    return Path(out_dir) / protocol.value / variant.value


def run_protocol(
    protocol: ProtocolName,
    variant: Variant,
    windows_dir: Path,
    out_dir: Path,
    config: Settings = default_settings,
    n_jobs: int = 1,
) -> List[FoldReport]:
    """
    Run every fold of a protocol for one variant and write the fold-report table.

    Args:
        protocol: Cross-validation protocol
        variant: Model variant
        windows_dir: Output of `preprocess`
        out_dir: Training output root
        config: Settings
        n_jobs: Folds trained in parallel

    Returns:
        list: Fold reports in fold order
    """
    manifest = load_window_manifest(windows_dir)
    folds = build_folds(protocol, manifest, config.BUDGET_WINDOWS)
    run_dir = run_dir_for(out_dir, protocol, variant)
    run_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Running {protocol.value} / {variant.value}: {len(folds)} fold(s)")
    reports = Parallel(n_jobs=n_jobs)(
        delayed(run_fold)(spec, protocol, variant, windows_dir, run_dir, config) for spec in folds
    )
    write_fold_reports(reports, run_dir / FOLD_REPORTS)
    return reports


def reports_frame(reports: Sequence[FoldReport]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump(mode="json") for r in reports], columns=FOLD_REPORT_COLUMNS)


def write_fold_reports(reports: Sequence[FoldReport], path: Path) -> Path:
    return write_table(reports_frame(reports), path, "fold-reports")


def read_fold_reports(path: Path) -> List[FoldReport]:
    df = read_table(path, "fold-reports", dtype={"fold_id": str})
    df = df.astype(object).where(df.notna(), None)
    return [FoldReport(**record) for record in df.to_dict(orient="records")]


def load_fold_model(run_dir: Path, fold_id: str, variant: Variant) -> LoadedModel:
    return load_checkpoint(checkpoint_path(fold_dir(run_dir, fold_id), variant))

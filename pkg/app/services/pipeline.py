"""
Preprocessing pipeline.
Turns raw traces into synchronised, imputed 5 Hz windows and handles
per-fold normalisation and channel masking.
"""

from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.core.artifacts import read_npz, read_table, write_npz, write_table
from app.core.config import Settings, settings as default_settings
from app.core.errors import MissingArtifactError
from app.models.records import (
    N_APS,
    WEARABLES,
    DenseStreams,
    RawTrace,
    SensorWindow,
    WindowSet,
    accel_channel_names,
    rssi_channel_names,
)
from app.models.schemas import ROOMS, CohortManifest, Group, NormalizationStats
from app.services.simhome import COHORT_FILE, MS_PER_DAY, MS_PER_HOUR, read_cohort_manifest, read_trace

logger = logging.getLogger(__name__)

Windows = Union[SensorWindow, WindowSet]

ANNOTATED = "annotated"
CONTINUOUS = "continuous"
WINDOW_DIR = "windows"


def resample_accel(
    accel: pd.DataFrame,
    timestamps_ms: Optional[np.ndarray] = None,
    tick_ms: int = 200,
) -> pd.DataFrame:
    """
    Downsample 30 Hz accelerometry onto the radio tick grid.

    Each tick carries the mean of the samples in its bin; empty bins are forward filled.

    Args:
        accel: Long samples with columns timestamp_ms, wearable, x, y, z
        timestamps_ms: Target ticks (defaults to every tick between the first and last sample)
        tick_ms: Bin width

    Returns:
        pd.DataFrame: timestamp_ms plus the six wearable-major channels
    """
    columns = ["timestamp_ms"] + accel_channel_names()
    if accel.empty:
        return pd.DataFrame(columns=columns)
    df = accel.assign(tick=(accel["timestamp_ms"] // tick_ms) * tick_ms)
    wide = df.groupby(["tick", "wearable"])[["x", "y", "z"]].mean().unstack("wearable")
    wide.columns = [f"{wearable}_{axis}" for axis, wearable in wide.columns]
    wide = wide.reindex(columns=accel_channel_names())
    if timestamps_ms is None:
        timestamps_ms = np.arange(wide.index.min(), wide.index.max() + tick_ms, tick_ms, dtype=np.int64)
    wide = wide.reindex(np.asarray(timestamps_ms, dtype=np.int64)).ffill().bfill()
    if wide.isna().any().any():
        logger.warning("Accelerometer stream missing a wearable; filling its channels with 0")
        wide = wide.fillna(0.0)
    wide.index.name = "timestamp_ms"
    return wide.reset_index()[columns]


def impute_rssi(
    packets: pd.DataFrame,
    timestamps_ms: Optional[np.ndarray] = None,
    ap_count: int = N_APS,
    missing_dbm: float = -120.0,
    tick_ms: int = 200,
) -> pd.DataFrame:
    """
    Densify sparse RSSI packets into one column per (wearable, AP); absent cells get `missing_dbm`.

    Returns:
        pd.DataFrame: timestamp_ms plus 2 * ap_count wearable-major channels
    """
    channels = rssi_channel_names(range(1, ap_count + 1))
    if timestamps_ms is None:
        if packets.empty:
            return pd.DataFrame(columns=["timestamp_ms"] + channels)
        ticks = (packets["timestamp_ms"].to_numpy() // tick_ms) * tick_ms
        timestamps_ms = np.arange(ticks.min(), ticks.max() + tick_ms, tick_ms, dtype=np.int64)
    timestamps_ms = np.asarray(timestamps_ms, dtype=np.int64)
    dense = np.full((len(timestamps_ms), len(channels)), missing_dbm, dtype=float)
    if not packets.empty:
        ticks = (packets["timestamp_ms"].to_numpy(dtype=np.int64) // tick_ms) * tick_ms
        rows = np.searchsorted(timestamps_ms, ticks)
        rows_clipped = np.minimum(rows, len(timestamps_ms) - 1)
        wearable = pd.Categorical(packets["wearable"], categories=list(WEARABLES)).codes
        ap = packets["ap"].to_numpy(dtype=np.int64)
        keep = (
            (rows < len(timestamps_ms))
            & (timestamps_ms[rows_clipped] == ticks)
            & (wearable >= 0)
            & (ap >= 1) & (ap <= ap_count)
        )
        cols = wearable * ap_count + (ap - 1)
        dense[rows_clipped[keep], cols[keep]] = packets["dbm"].to_numpy(dtype=float)[keep]
    out = pd.DataFrame(dense, columns=channels)
    out.insert(0, "timestamp_ms", timestamps_ms)
    return out


def annotation_mask(timestamps_ms: np.ndarray, config: Settings = default_settings) -> np.ndarray:
    """True for ticks inside the daily camera-annotated span."""
    ms_of_day = np.asarray(timestamps_ms, dtype=np.int64) % MS_PER_DAY
    start = int(config.ANNOTATION_START_HOUR * MS_PER_HOUR)
    end = start + int(config.ANNOTATION_HOURS * MS_PER_HOUR)
    return (ms_of_day >= start) & (ms_of_day < end)


def densify_trace(trace: RawTrace, config: Settings = default_settings) -> DenseStreams:
    """
    Synchronise one trace on the truth tick grid.

    Labels hold room indices inside the annotated span and -1 elsewhere.
    """
    index = {room.value: i for i, room in enumerate(ROOMS)}
    timestamps = trace.truth["timestamp_ms"].to_numpy(dtype=np.int64)
    rssi = impute_rssi(trace.rssi, timestamps, missing_dbm=config.RSSI_MISSING_DBM, tick_ms=config.tick_ms)
    accel = resample_accel(trace.accel, timestamps, tick_ms=config.tick_ms)
    rooms = trace.truth["room"].map(index).to_numpy(dtype=np.int64)
    labels = np.where(annotation_mask(timestamps, config), rooms, -1)
    return DenseStreams(
        timestamps_ms=timestamps,
        rssi=rssi[rssi_channel_names()].to_numpy(dtype=float),
        accel=accel[accel_channel_names()].to_numpy(dtype=float),
        labels=labels,
    )


def window_set(
    streams: DenseStreams,
    participant: str,
    window: int = 25,
    require_labels: bool = True,
    tick_ms: int = 200,
) -> WindowSet:
    """
    Cut non-overlapping windows from every valid run of the streams.

    A run is a maximal stretch of consecutive ticks (and, when `require_labels`,
    of labelled ticks); each run is chunked from its start and its remainder dropped.
    """
    n = len(streams)
    valid = streams.labels >= 0 if require_labels else np.ones(n, dtype=bool)
    starts: List[int] = []
    if n:
        breaks = np.ones(n, dtype=bool)
        breaks[1:] = (np.diff(streams.timestamps_ms) != tick_ms) | (valid[1:] != valid[:-1])
        edges = np.r_[np.flatnonzero(breaks), n]
        for lo, hi in zip(edges[:-1], edges[1:]):
            if valid[lo]:
                starts.extend(range(int(lo), int(hi) - window + 1, window))
    idx = np.asarray(starts, dtype=np.int64)[:, None] + np.arange(window)[None, :]
    idx = idx.reshape(-1, window)
    return WindowSet(
        rssi=streams.rssi[idx],
        accel=streams.accel[idx],
        labels=streams.labels[idx],
        participants=np.full(len(idx), participant),
        start_ms=streams.timestamps_ms[idx[:, 0]] if len(idx) else np.zeros(0, dtype=np.int64),
        rssi_channels=rssi_channel_names(),
        accel_channels=accel_channel_names(),
    )


def make_windows(
    streams: DenseStreams,
    participant: str,
    window: int = 25,
    require_labels: bool = True,
    tick_ms: int = 200,
) -> List[SensorWindow]:
    """
    Non-overlapping fixed-length windows; windows crossing gaps or unlabelled ticks are dropped.

    Returns:
        list: SensorWindow per kept window (empty when the stream is shorter than `window`)
    """
    return window_set(streams, participant, window, require_labels, tick_ms).windows()


# ---------------------------------------------------------------------------
# Normalisation and masking
# ---------------------------------------------------------------------------


def _as_set(windows: Windows) -> WindowSet:
    if isinstance(windows, WindowSet):
        return windows
    return WindowSet.from_windows([windows])


def _like(original: Windows, result: WindowSet) -> Windows:
    return result if isinstance(original, WindowSet) else result.windows()[0]


def _channel_matrix(ws: WindowSet) -> np.ndarray:
    parts = [ws.rssi.reshape(-1, ws.rssi.shape[-1])]
    if ws.accel is not None:
        parts.append(ws.accel.reshape(-1, ws.accel.shape[-1]))
    return np.concatenate(parts, axis=1).astype(float)


def fit_normalizer(windows: Windows) -> NormalizationStats:
    """
    Per-channel z-score statistics over every step of the training windows.
    Channels with zero spread get std 1.
    """
    ws = _as_set(windows)
    if len(ws) == 0:
        raise ValueError("cannot fit a normaliser on zero windows")
    matrix = _channel_matrix(ws)
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    return NormalizationStats(
        channels=list(ws.rssi_channels) + (list(ws.accel_channels) if ws.accel is not None else []),
        mean=mean.tolist(),
        std=std.tolist(),
    )


def _stats_for(stats: NormalizationStats, channels: Sequence[str]):
    lookup = {c: i for i, c in enumerate(stats.channels)}
    missing = [c for c in channels if c not in lookup]
    if missing:
        raise ValueError(f"normaliser has no statistics for channels {missing}")
    pick = [lookup[c] for c in channels]
    return np.asarray(stats.mean)[pick], np.asarray(stats.std)[pick]


def _transform(stats: NormalizationStats, windows: Windows, invert: bool) -> Windows:
    ws = _as_set(windows)

    def scale(block, channels):
        mean, std = _stats_for(stats, channels)
        block = block.astype(float)
        return block * std + mean if invert else (block - mean) / std

    out = WindowSet(
        rssi=scale(ws.rssi, ws.rssi_channels),
        accel=None if ws.accel is None else scale(ws.accel, ws.accel_channels),
        labels=ws.labels,
        participants=ws.participants,
        start_ms=ws.start_ms,
        rssi_channels=list(ws.rssi_channels),
        accel_channels=list(ws.accel_channels),
    )
    return _like(windows, out)


def apply_normalizer(stats: NormalizationStats, windows: Windows) -> Windows:
    """z-score every channel by name; imputed cells are scaled like any other value."""
    return _transform(stats, windows, invert=False)


def invert_normalizer(stats: NormalizationStats, windows: Windows) -> Windows:
    """Undo apply_normalizer."""
    return _transform(stats, windows, invert=True)


def mask_channels(windows: Windows, keep_aps: Iterable[int], keep_accel: bool = True) -> Windows:
    """
    Drop RSSI channels of APs outside `keep_aps` (both wearables) and optionally the accelerometer block.

    Args:
        windows: SensorWindow or WindowSet
        keep_aps: AP ids to keep, a subset of 1..10
        keep_accel: Keep the accelerometer block

    Returns:
        Windows of the same type with the reduced channel layout
    """
    keep = sorted(set(int(a) for a in keep_aps))
    if not keep:
        raise ValueError("keep_aps must not be empty")
    if keep[0] < 1 or keep[-1] > N_APS:
        raise ValueError(f"keep_aps must be a subset of 1..{N_APS}, got {keep}")
    ws = _as_set(windows)
    wanted = set(rssi_channel_names(keep))
    cols = [i for i, c in enumerate(ws.rssi_channels) if c in wanted]
    out = WindowSet(
        rssi=ws.rssi[..., cols],
        accel=ws.accel if keep_accel else None,
        labels=ws.labels,
        participants=ws.participants,
        start_ms=ws.start_ms,
        rssi_channels=[ws.rssi_channels[i] for i in cols],
        accel_channels=list(ws.accel_channels) if keep_accel and ws.accel is not None else [],
    )
    return _like(windows, out)


def select_top_aps(windows: Windows, k: int = 4, missing_dbm: float = -120.0) -> List[int]:
    """
    The `k` APs with most received (non-imputed) cells over both wearables.
    Ties go to the lower AP id.
    """
    ws = _as_set(windows)
    received = (ws.rssi != missing_dbm).reshape(-1, ws.rssi.shape[-1]).sum(axis=0)
    counts: Dict[int, int] = {}
    for channel, count in zip(ws.rssi_channels, received):
        ap = int(channel.rsplit("_ap", 1)[1])
        counts[ap] = counts.get(ap, 0) + int(count)
    ranked = sorted(counts, key=lambda ap: (-counts[ap], ap))
    return sorted(ranked[:k])


# ---------------------------------------------------------------------------
# Window files
# ---------------------------------------------------------------------------


def window_path(root: Path, participant: str, kind: str) -> Path:
    return Path(root) / WINDOW_DIR / f"{participant}_{kind}.npz"


def save_windows(ws: WindowSet, path: Path, kind: str, dtype=np.float64) -> Path:
    header = {
        "kind": kind,
        "n_windows": len(ws),
        "window_len": int(ws.labels.shape[1]) if len(ws) else 0,
        "rssi_channels": list(ws.rssi_channels),
        "accel_channels": list(ws.accel_channels),
    }
    arrays = {
        "rssi": ws.rssi.astype(dtype),
        "labels": ws.labels.astype(np.int8),
        "participants": ws.participants.astype(str),
        "start_ms": ws.start_ms.astype(np.int64),
    }
    if ws.accel is not None:
        arrays["accel"] = ws.accel.astype(dtype)
    return write_npz(path, header, arrays)


def load_windows(path: Path) -> WindowSet:
    header, arrays = read_npz(path)
    return WindowSet(
        rssi=arrays["rssi"].astype(float),
        accel=arrays["accel"].astype(float) if "accel" in arrays else None,
        labels=arrays["labels"].astype(np.int64),
        participants=arrays["participants"],
        start_ms=arrays["start_ms"],
        rssi_channels=header["rssi_channels"],
        accel_channels=header["accel_channels"],
    )


INDEX_COLUMNS = ["window_id", "participant", "kind", "row", "start_ms", "file"]
WINDOW_INDEX = "index.csv"


def window_index(ws: WindowSet, kind: str, file: str) -> pd.DataFrame:
    """One row per window of a saved set: id, owner, position in its file and start time."""
    rows = np.arange(len(ws))
    return pd.DataFrame({
        "window_id": [f"{p}_{kind}_{i:06d}" for p, i in zip(ws.participants.astype(str), rows)],
        "participant": ws.participants.astype(str),
        "kind": kind,
        "row": rows,
        "start_ms": ws.start_ms.astype(np.int64),
        "file": file,
    }, columns=INDEX_COLUMNS)


def read_window_index(windows_dir: Path) -> pd.DataFrame:
    """Window manifest written by preprocess_cohort."""
    return read_table(Path(windows_dir) / WINDOW_DIR / WINDOW_INDEX, "window-index",
                      dtype={"window_id": str, "participant": str, "kind": str, "file": str})


def _empty_set(window: int) -> WindowSet:
    return WindowSet(
        rssi=np.zeros((0, window, 2 * N_APS)),
        accel=np.zeros((0, window, 6)),
        labels=np.zeros((0, window), dtype=np.int64),
        participants=np.zeros(0, dtype=str),
        start_ms=np.zeros(0, dtype=np.int64),
        rssi_channels=rssi_channel_names(),
        accel_channels=accel_channel_names(),
    )


def _preprocess_participant(
    data_dir: Path, out_dir: Path, participant: str, days: int, continuous: bool, config: Settings
) -> Tuple[Dict[str, int], pd.DataFrame]:
    annotated, full = [], []
    for day in range(1, days + 1):
        streams = densify_trace(read_trace(data_dir, participant, day), config)
        annotated.append(window_set(streams, participant, config.WINDOW_STEPS, True, config.tick_ms))
        if continuous:
            full.append(window_set(streams, participant, config.WINDOW_STEPS, False, config.tick_ms))
    ann = [s for s in annotated if len(s)]
    ann_set = WindowSet.concat(ann) if ann else _empty_set(config.WINDOW_STEPS)
    path = save_windows(ann_set, window_path(out_dir, participant, ANNOTATED), ANNOTATED)
    counts = {ANNOTATED: len(ann_set), CONTINUOUS: 0}
    index = [window_index(ann_set, ANNOTATED, path.relative_to(out_dir).as_posix())]
    if continuous:
        full_nonempty = [s for s in full if len(s)]
        full_set = WindowSet.concat(full_nonempty) if full_nonempty else _empty_set(config.WINDOW_STEPS)
        path = save_windows(full_set, window_path(out_dir, participant, CONTINUOUS), CONTINUOUS, dtype=np.float32)
        counts[CONTINUOUS] = len(full_set)
        index.append(window_index(full_set, CONTINUOUS, path.relative_to(out_dir).as_posix()))
    return counts, pd.concat(index, ignore_index=True)


def preprocess_cohort(
    data_dir: Path,
    out_dir: Path,
    config: Settings = default_settings,
    n_jobs: int = 1,
) -> Dict[str, Dict[str, int]]:
    """
    Window every participant of a simulated cohort.

    Annotated windows (labelled span only) are written for everyone; continuous
    day-long windows for PD participants, whose gait features need full-day predictions.

    Returns:
        dict: Window counts per participant and kind
    """
    data_dir, out_dir = Path(data_dir), Path(out_dir)
    manifest = read_cohort_manifest(data_dir)
    (out_dir / WINDOW_DIR).mkdir(parents=True, exist_ok=True)
    (out_dir / "cohort.json").write_text(manifest.model_dump_json(indent=2) + "\n")
    participants = manifest.participants()
    results = Parallel(n_jobs=n_jobs)(
        delayed(_preprocess_participant)(
            data_dir, out_dir, pid, manifest.days,
            manifest.profile(pid).group == Group.PD, config,
        )
        for pid in participants
    )
    summary = {pid: counts for pid, (counts, _) in zip(participants, results)}
    index = pd.concat([frame for _, frame in results], ignore_index=True)
    write_table(index, out_dir / WINDOW_DIR / WINDOW_INDEX, "window-index")
    logger.info(f"Preprocessed {len(participants)} participants into {out_dir / WINDOW_DIR}")
    return summary


def load_participant_windows(windows_dir: Path, participant: str, kind: str = ANNOTATED) -> WindowSet:
    path = window_path(windows_dir, participant, kind)
    if not path.is_file():
        raise MissingArtifactError(f"Missing {kind} windows for {participant}: {path}; run `preprocess` first")
    return load_windows(path)


def load_window_manifest(windows_dir: Path) -> CohortManifest:
    path = Path(windows_dir) / COHORT_FILE
    if not path.is_file():
        raise MissingArtifactError(f"Missing preprocess output {path}; run `preprocess` first")
    return read_cohort_manifest(windows_dir)

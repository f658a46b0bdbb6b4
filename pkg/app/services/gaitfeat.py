"""
In-home gait features from room sequences.
Hallway-mediated room-to-room transitions, their durations and per-slot aggregates.
"""

from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from app.core.artifacts import read_table, write_table
from app.core.config import Settings, settings as default_settings
from app.models.records import RoomSequence
from app.models.schemas import (
    GAIT_FEATURE_COLUMNS,
    HALLWAY_INDEX,
    PAIR_LABELS,
    ROOM_INDEX,
    ROOMS,
    TRACKED_PAIRS,
    GaitFeatureRow,
    MedicationSchedule,
    MedState,
    Room,
    Transition,
)
from app.services.simhome import day_slot

logger = logging.getLogger(__name__)

MAX_TRANSITION_S = 60.0
TRACKED_ROOMS = frozenset(ROOM_INDEX[r] for r in (Room.KITCHEN, Room.DINING, Room.LIVING))
TRANSITION_COLUMNS = ["participant", "pair", "from_room", "to_room", "start_ms", "end_ms", "duration_s", "med_state"]
ROW_COLUMNS = ["participant", "day", "slot", *GAIT_FEATURE_COLUMNS, "med_state"]


def _segments(timestamps_ms: np.ndarray, tick_ms: int) -> List[Tuple[int, int]]:
    """[start, end) index ranges of gap-free stretches."""
    if len(timestamps_ms) == 0:
        return []
    breaks = np.flatnonzero(np.diff(timestamps_ms) != tick_ms) + 1
    edges = np.r_[0, breaks, len(timestamps_ms)]
    return list(zip(edges[:-1].tolist(), edges[1:].tolist()))


def _runs(rooms: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Start and end indices of maximal constant runs."""
    change = np.flatnonzero(np.diff(rooms)) + 1
    return np.r_[0, change], np.r_[change, len(rooms)]


def extract_transitions(
    sequence: RoomSequence,
    tick_ms: int = 200,
    max_duration_s: float = MAX_TRANSITION_S,
) -> List[Transition]:
    """
    Find hallway runs bounded by two different tracked rooms.

    Sequences are split wherever consecutive timestamps are not one tick apart;
    a run touching a split is never a transition.

    Args:
        sequence: Per-step rooms of one participant
        tick_ms: Step length
        max_duration_s: Longest hallway dwell still counted

    Returns:
        list: Transitions in time order
    """
    ts = np.asarray(sequence.timestamps_ms, dtype=np.int64)
    rooms = np.asarray(sequence.rooms, dtype=np.int64)
    out: List[Transition] = []
    for lo, hi in _segments(ts, tick_ms):
        starts, ends = _runs(rooms[lo:hi])
        run_rooms = rooms[lo:hi][starts]
        for i in range(1, len(starts) - 1):
            if run_rooms[i] != HALLWAY_INDEX:
                continue
            before, after = int(run_rooms[i - 1]), int(run_rooms[i + 1])
            if before == after or before not in TRACKED_ROOMS or after not in TRACKED_ROOMS:
                continue
            steps = int(ends[i] - starts[i])
            duration = steps * tick_ms / 1000.0
            if duration > max_duration_s:
                continue
            out.append(Transition(
                from_room=ROOMS[before],
                to_room=ROOMS[after],
                start_ms=int(ts[lo + starts[i]]),
                end_ms=int(ts[lo + ends[i] - 1]) + tick_ms,
                duration_s=duration,
            ))
    return out


def predictions_to_sequence(
    participant: str,
    start_ms: np.ndarray,
    predictions: np.ndarray,
    tick_ms: int = 200,
) -> RoomSequence:
    """Flatten per-window step predictions into one time-ordered room sequence."""
    predictions = np.asarray(predictions, dtype=np.int64)
    if predictions.size == 0:
        return RoomSequence(participant, np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64))
    steps = np.arange(predictions.shape[1], dtype=np.int64) * tick_ms
    ts = (np.asarray(start_ms, dtype=np.int64)[:, None] + steps[None, :]).ravel()
    rooms = predictions.ravel()
    order = np.argsort(ts, kind="stable")
    return RoomSequence(participant, ts[order], rooms[order])


def aggregate_features(
    participant: str,
    transitions: Sequence[Transition],
    schedule: Optional[MedicationSchedule],
    days: int,
    config: Settings = default_settings,
) -> List[GaitFeatureRow]:
    """
    One row per (day, slot): per-pair mean duration and count.

    A pair without transitions in a slot gets count 0 and mean MAX_TRANSITION_S.
    Participants without a schedule are ON throughout.

    Returns:
        list: slots_per_day x days rows, in (day, slot) order
    """
    buckets: Dict[Tuple[int, int, Tuple[Room, Room]], List[float]] = {}
    if transitions:
        days_of, slots_of = day_slot(np.array([t.start_ms for t in transitions]), config)
        for t, d, s in zip(transitions, days_of.tolist(), slots_of.tolist()):
            if s >= 0:
                buckets.setdefault((d, s, t.pair), []).append(t.duration_s)

    rows = []
    for day in range(1, days + 1):
        for slot in range(config.slots_per_day):
            values = {}
            for pair in TRACKED_PAIRS:
                durations = buckets.get((day, slot, pair), [])
                label = PAIR_LABELS[pair]
                values[f"{label}_mean"] = float(np.mean(durations)) if durations else MAX_TRANSITION_S
                values[f"{label}_count"] = len(durations)
            state = schedule.state_at(day, slot) if schedule is not None else MedState.ON
            rows.append(GaitFeatureRow(participant=participant, day=day, slot=slot, med_state=state, **values))
    return rows


def transitions_frame(
    participant: str,
    transitions: Sequence[Transition],
    schedule: Optional[MedicationSchedule],
    config: Settings = default_settings,
) -> pd.DataFrame:
    """Transitions as rows, each tagged with the medication state of its slot."""
    if not transitions:
        return pd.DataFrame(columns=TRANSITION_COLUMNS)
    days_of, slots_of = day_slot(np.array([t.start_ms for t in transitions]), config)
    records = []
    for t, d, s in zip(transitions, days_of.tolist(), slots_of.tolist()):
        state = schedule.state_at(d, s) if schedule is not None and s >= 0 else MedState.ON
        records.append({
            "participant": participant,
            "pair": PAIR_LABELS[t.pair],
            "from_room": t.from_room.value,
            "to_room": t.to_room.value,
            "start_ms": t.start_ms,
            "end_ms": t.end_ms,
            "duration_s": t.duration_s,
            "med_state": state.value,
        })
    return pd.DataFrame.from_records(records, columns=TRANSITION_COLUMNS)


def mean_transition_table(
    transitions_by_model: Mapping[str, pd.DataFrame],
    reference: Optional[str] = None,
) -> pd.DataFrame:
    """
    Mean (sd) transition duration per model and pair.

    A pair a model never captured is N/A. With `reference`, each cell also
    carries the absolute offset of its mean from the reference model's mean.

    Args:
        transitions_by_model: Transition frames keyed by model name
        reference: Model whose means are the ground truth

    Returns:
        pd.DataFrame: model, pair, count, mean_s, sd_s, offset_s, cell
    """
    records = []
    for model, df in transitions_by_model.items():
        for pair in PAIR_LABELS.values():
            durations = df.loc[df["pair"] == pair, "duration_s"].to_numpy(dtype=float)
            if durations.size:
                mean, sd = float(durations.mean()), float(durations.std(ddof=0))
                cell = f"{mean:.2f} ({sd:.2f})"
            else:
                mean, sd, cell = float("nan"), float("nan"), "N/A"
            records.append({"model": model, "pair": pair, "count": int(durations.size),
                            "mean_s": mean, "sd_s": sd, "cell": cell})
    table = pd.DataFrame.from_records(records)
    table["offset_s"] = float("nan")
    if reference is not None and reference in transitions_by_model:
        ref = table[table["model"] == reference].set_index("pair")["mean_s"]
        table["offset_s"] = (table["mean_s"] - table["pair"].map(ref)).abs()
    return table[["model", "pair", "count", "mean_s", "sd_s", "offset_s", "cell"]]


def on_off_means(transitions: pd.DataFrame, pair: str) -> List[Tuple[str, float, float]]:
    """
    Per participant: mean OFF and mean ON duration of one pair.
    Participants lacking transitions in either state are left out.
    """
    df = transitions[transitions["pair"] == pair]
    out = []
    for participant, group in df.groupby("participant", sort=True):
        off = group.loc[group["med_state"] == MedState.OFF.value, "duration_s"]
        on = group.loc[group["med_state"] == MedState.ON.value, "duration_s"]
        if len(off) and len(on):
            out.append((str(participant), float(off.mean()), float(on.mean())))
    return out


def rows_frame(rows: Sequence[GaitFeatureRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump(mode="json") for r in rows], columns=ROW_COLUMNS)


def write_gait_rows(rows: Sequence[GaitFeatureRow], path: Path) -> Path:
    return write_table(rows_frame(rows), path, "gait-features")


def read_gait_rows(path: Path) -> List[GaitFeatureRow]:
    df = read_table(path, "gait-features")
    return [GaitFeatureRow(**record) for record in df.to_dict(orient="records")]


def write_transitions(df: pd.DataFrame, path: Path) -> Path:
    return write_table(df[TRANSITION_COLUMNS], path, "transitions")


def read_transitions(path: Path) -> pd.DataFrame:
    return read_table(path, "transitions")

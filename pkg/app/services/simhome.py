"""
Synthetic smart-home cohort generator.
Simulates room occupancy, wearable RSSI at ten access points, wrist accelerometry
and medication schedules for PD/HC participant pairs.
"""

from collections import deque
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.core.artifacts import read_table, write_table
from app.core.config import Settings, settings as default_settings
from app.core.errors import MissingArtifactError
from app.core.seeding import seed_sequence, sub_rng
from app.models.records import (
    ACCEL_COLUMNS,
    RSSI_COLUMNS,
    TRUTH_COLUMNS,
    WEARABLES,
    RawTrace,
    Trajectory,
)
from app.models.schemas import (
    ROOM_INDEX,
    ROOMS,
    AccessPoint,
    CohortManifest,
    Demographics,
    Group,
    HouseLayout,
    MedicationSchedule,
    MedState,
    ParticipantProfile,
    Room,
    RoomGeometry,
    ScheduleWindow,
)

logger = logging.getLogger(__name__)

COHORT_FILE = "cohort.json"
MS_PER_DAY = 86_400_000
MS_PER_HOUR = 3_600_000


def _rect(x0: float, y0: float, x1: float, y1: float) -> List[Tuple[float, float]]:
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def build_default_layout() -> HouseLayout:
    """
    Fixed two-storey house: six labelled ground-floor zones around a hallway hub,
    six ground-floor and four first-floor access points.

    Returns:
        HouseLayout: The default layout
    """
    rooms = [
        RoomGeometry(id=Room.KITCHEN, polygon=_rect(0, 6, 5, 12)),
        RoomGeometry(id=Room.HALLWAY, polygon=_rect(5, 2, 7, 10)),
        RoomGeometry(id=Room.DINING, polygon=_rect(0, 0, 5, 6)),
        RoomGeometry(id=Room.LIVING, polygon=_rect(7, 0, 12, 12)),
        RoomGeometry(id=Room.STAIRS, polygon=_rect(5, 0, 7, 2)),
        RoomGeometry(id=Room.PORCH, polygon=_rect(5, 10, 7, 12)),
    ]
    access_points = [
        AccessPoint(id=1, x=1.0, y=11.0, floor=0, room=Room.KITCHEN),
        AccessPoint(id=2, x=6.0, y=6.0, floor=0, room=Room.HALLWAY),
        AccessPoint(id=3, x=1.0, y=1.0, floor=0, room=Room.DINING),
        AccessPoint(id=4, x=11.0, y=6.0, floor=0, room=Room.LIVING),
        AccessPoint(id=5, x=6.0, y=1.0, floor=0, room=Room.STAIRS),
        AccessPoint(id=6, x=6.0, y=11.0, floor=0, room=Room.PORCH),
        AccessPoint(id=7, x=2.5, y=9.0, floor=1, room=Room.KITCHEN),
        AccessPoint(id=8, x=2.5, y=3.0, floor=1, room=Room.DINING),
        AccessPoint(id=9, x=9.5, y=9.0, floor=1, room=Room.LIVING),
        AccessPoint(id=10, x=9.5, y=3.0, floor=1, room=Room.LIVING),
    ]
    adjacency = [(Room.HALLWAY, r) for r in ROOMS if r != Room.HALLWAY]
    return HouseLayout(
        rooms=rooms,
        access_points=access_points,
        adjacency=adjacency,
        footprint=_rect(0, 0, 12, 12),
    )


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------


def points_in_polygon(polygon: Sequence[Tuple[float, float]], x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Even-odd ray casting, vectorised over points."""
    px = np.array([p[0] for p in polygon], dtype=float)
    py = np.array([p[1] for p in polygon], dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = np.zeros(x.shape, dtype=bool)
    j = len(px) - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(len(px)):
            crosses = (py[i] > y) != (py[j] > y)
            x_cross = (px[j] - px[i]) * (y - py[i]) / (py[j] - py[i]) + px[i]
            inside ^= crosses & (x < x_cross)
            j = i
    return inside


def locate_rooms(layout: HouseLayout, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Room index of every point; points outside the footprint take the nearest centroid.

    Returns:
        np.ndarray: int64 room indices in label order
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(x.shape, -1, dtype=np.int64)
    for room in ROOMS:
        mask = (out < 0) & points_in_polygon(layout.room(room).polygon, x, y)
        out[mask] = ROOM_INDEX[room]
    missing = out < 0
    if np.any(missing):
        centroids = np.array([layout.room(r).centroid for r in ROOMS])
        d2 = (x[missing, None] - centroids[:, 0]) ** 2 + (y[missing, None] - centroids[:, 1]) ** 2
        out[missing] = np.argmin(d2, axis=1)
    return out


def door_hops(layout: HouseLayout) -> np.ndarray:
    """Room-to-room door count (walls crossed) via breadth-first search over the adjacency."""
    n = len(ROOMS)
    hops = np.zeros((n, n), dtype=np.int64)
    for source in ROOMS:
        dist = {source: 0}
        queue = deque([source])
        while queue:
            room = queue.popleft()
            for nxt in layout.neighbours(room):
                if nxt not in dist:
                    dist[nxt] = dist[room] + 1
                    queue.append(nxt)
        for room, d in dist.items():
            hops[ROOM_INDEX[source], ROOM_INDEX[room]] = d
    return hops


# ---------------------------------------------------------------------------
# Day grid and medication state
# ---------------------------------------------------------------------------


def day_start_ms(day: int, config: Settings = default_settings) -> int:
    """Timestamp of the first tick of `day` (1-based), in ms since day 1 00:00."""
    return (day - 1) * MS_PER_DAY + config.DAY_START_HOUR * MS_PER_HOUR


def day_slot(timestamps_ms: np.ndarray, config: Settings = default_settings) -> Tuple[np.ndarray, np.ndarray]:
    """
    Day (1-based) and slot of each timestamp; slot is -1 outside the daily span.
    """
    ts = np.asarray(timestamps_ms, dtype=np.int64)
    day = ts // MS_PER_DAY + 1
    hour_ms = ts % MS_PER_DAY - config.DAY_START_HOUR * MS_PER_HOUR
    slot = hour_ms // (config.SLOT_HOURS * MS_PER_HOUR)
    slot = np.where((hour_ms >= 0) & (slot < config.slots_per_day), slot, -1)
    return day, slot


def off_mask(
    timestamps_ms: np.ndarray,
    schedule: Optional[MedicationSchedule],
    config: Settings = default_settings,
) -> np.ndarray:
    """True where the participant is in their OFF-medication slot."""
    ts = np.asarray(timestamps_ms, dtype=np.int64)
    if schedule is None:
        return np.zeros(ts.shape, dtype=bool)
    off = schedule.off_window
    day, slot = day_slot(ts, config)
    return (day == off.day) & (slot == off.slot)


# ---------------------------------------------------------------------------
# Trajectory, RSSI and accelerometry
# ---------------------------------------------------------------------------


def _traverse(a: np.ndarray, hub: np.ndarray, b: np.ndarray, speed: float, dt: float) -> np.ndarray:
    """Points every `dt` seconds along a -> hub -> b at constant speed; the last point is b."""
    seg1, seg2 = hub - a, b - hub
    l1, l2 = float(np.hypot(*seg1)), float(np.hypot(*seg2))
    total = l1 + l2
    n = max(1, int(np.ceil(total / (speed * dt))))
    s = np.minimum(np.arange(1, n + 1) * speed * dt, total)
    first = s <= l1
    frac1 = np.where(first, s / max(l1, 1e-12), 0.0)
    frac2 = np.where(first, 0.0, (s - l1) / max(l2, 1e-12))
    pts = np.where(first[:, None], a + np.outer(frac1, seg1), hub + np.outer(frac2, seg2))
    return pts


def simulate_trajectory(
    profile: ParticipantProfile,
    schedule: Optional[MedicationSchedule],
    duration_s: float,
    seed,
    layout: Optional[HouseLayout] = None,
    start_ms: Optional[int] = None,
    config: Settings = default_settings,
) -> Trajectory:
    """
    Semi-Markov walk over the house.

    Dwells in a room for an exponential time with the profile's mean, then walks
    centroid -> hallway centroid -> centroid of a uniformly chosen other room.
    Walking speed is the OFF speed when the traversal starts inside the OFF slot.

    Args:
        profile: Participant parameters
        schedule: Medication schedule (None for healthy controls)
        duration_s: Simulated seconds
        seed: Integer seed or SeedSequence
        layout: House layout (default layout if omitted)
        start_ms: Timestamp of the first tick (day 1 start if omitted)
        config: Settings

    Returns:
        Trajectory: Positions, room truth, speed and OFF flag per tick
    """
    if duration_s <= 0:
        raise ValueError(f"duration must be positive, got {duration_s}")
    layout = layout or build_default_layout()
    rng = np.random.default_rng(seed)
    start_ms = day_start_ms(1, config) if start_ms is None else int(start_ms)
    tick_ms = config.tick_ms
    dt = tick_ms / 1000.0
    n_ticks = max(1, int(round(duration_s * config.RSSI_HZ)))

    dwell_rooms = sorted(profile.dwell_mean_s, key=lambda r: ROOM_INDEX[r])
    centroids = {r.id: np.array(r.centroid) for r in layout.rooms}
    hub = centroids[layout.hallway_id]

    xy_parts, speed_parts = [], []
    filled = 0
    room = dwell_rooms[int(rng.integers(len(dwell_rooms)))]
    while filled < n_ticks:
        dwell_ticks = max(1, int(round(rng.exponential(profile.dwell_mean_s[room]) * config.RSSI_HZ)))
        xy_parts.append(np.repeat(centroids[room][None, :], dwell_ticks, axis=0))
        speed_parts.append(np.zeros(dwell_ticks))
        filled += dwell_ticks
        if filled >= n_ticks:
            break
        choices = [r for r in dwell_rooms if r != room]
        dest = choices[int(rng.integers(len(choices)))]
        departure = start_ms + filled * tick_ms
        is_off = bool(off_mask(np.array([departure]), schedule, config)[0])
        speed = profile.walk_speed_off if is_off else profile.walk_speed_on
        path = _traverse(centroids[room], hub, centroids[dest], speed, dt)
        xy_parts.append(path)
        speed_parts.append(np.full(len(path), speed))
        filled += len(path)
        room = dest

    xy = np.concatenate(xy_parts)[:n_ticks]
    speed = np.concatenate(speed_parts)[:n_ticks]
    timestamps = start_ms + np.arange(n_ticks, dtype=np.int64) * tick_ms
    return Trajectory(
        timestamps_ms=timestamps,
        x=xy[:, 0],
        y=xy[:, 1],
        rooms=locate_rooms(layout, xy[:, 0], xy[:, 1]),
        speed=speed,
        off=off_mask(timestamps, schedule, config),
    )


def expected_rssi(
    distance_m: np.ndarray,
    walls: np.ndarray,
    floors: np.ndarray,
    config: Settings = default_settings,
) -> np.ndarray:
    """Noise-free log-distance path loss with wall and floor attenuation (dBm)."""
    d = np.maximum(np.asarray(distance_m, dtype=float), config.PATH_LOSS_D0)
    return (
        config.PATH_LOSS_P0
        - 10.0 * config.PATH_LOSS_EXPONENT * np.log10(d / config.PATH_LOSS_D0)
        - np.asarray(walls) * config.WALL_ATTENUATION_DB
        - np.asarray(floors) * config.FLOOR_ATTENUATION_DB
    )


def synthesize_rssi(
    trajectory: Trajectory,
    layout: HouseLayout,
    seed,
    config: Settings = default_settings,
) -> pd.DataFrame:
    """
    RSSI packets of both wearables at every access point.

    A packet is emitted only when the shadowed signal stays at or above the
    reception floor. Wearables sit at -/+ WEARABLE_OFFSET_M in x of the body.

    Returns:
        pd.DataFrame: Columns timestamp_ms, wearable, ap, dbm ordered by time, wearable, ap
    """
    if len(trajectory) == 0:
        raise ValueError("positions must be non-empty")
    rng = np.random.default_rng(seed)
    aps = sorted(layout.access_points, key=lambda ap: ap.id)
    ap_xy = np.array([(ap.x, ap.y) for ap in aps])
    ap_floor = np.array([ap.floor for ap in aps], dtype=float)
    ap_room = np.array([ROOM_INDEX[ap.room] for ap in aps])
    walls = door_hops(layout)[trajectory.rooms][:, ap_room]

    offsets = np.array([-config.WEARABLE_OFFSET_M, config.WEARABLE_OFFSET_M])
    wx = trajectory.x[:, None] + offsets[None, :]
    dx = wx[:, :, None] - ap_xy[None, None, :, 0]
    dy = trajectory.y[:, None, None] - ap_xy[None, None, :, 1]
    dz = (ap_floor * config.FLOOR_HEIGHT_M)[None, None, :]
    distance = np.sqrt(dx ** 2 + dy ** 2 + dz ** 2)

    mean = expected_rssi(distance, walls[:, None, :], ap_floor[None, None, :], config)
    dbm = mean + rng.normal(0.0, config.SHADOWING_STD_DB, size=mean.shape)
    received = dbm >= config.RECEPTION_FLOOR_DBM

    t_idx, w_idx, ap_idx = np.nonzero(received)
    return pd.DataFrame({
        "timestamp_ms": trajectory.timestamps_ms[t_idx],
        "wearable": np.array(WEARABLES)[w_idx],
        "ap": np.array([ap.id for ap in aps])[ap_idx],
        "dbm": np.round(dbm[t_idx, w_idx, ap_idx], 1),
    }, columns=RSSI_COLUMNS)


def synthesize_accel(
    trajectory: Trajectory,
    profile: ParticipantProfile,
    schedule: Optional[MedicationSchedule],
    seed,
    config: Settings = default_settings,
) -> pd.DataFrame:
    """
    Six-axis wrist accelerometry at ACCEL_HZ.

    Gravity on z, a WALK_FREQ_HZ gait oscillation scaled by walking speed, wrist
    bursts while dwelling in the kitchen (right wrist dominant), low-variance
    dwells elsewhere, a PD tremor sinusoid amplified during OFF, and white noise.

    Returns:
        pd.DataFrame: Columns timestamp_ms, wearable, x, y, z ordered by time then wearable
    """
    if len(trajectory) == 0:
        raise ValueError("truth must be non-empty")
    rng = np.random.default_rng(seed)
    per_tick = config.ACCEL_HZ // config.RSSI_HZ
    n = len(trajectory) * per_tick
    offsets = (np.arange(per_tick) * 1000 + config.ACCEL_HZ // 2) // config.ACCEL_HZ
    ts = (trajectory.timestamps_ms[:, None] + offsets[None, :]).ravel()
    t = ts / 1000.0

    speed = np.repeat(trajectory.speed, per_tick)
    rooms = np.repeat(trajectory.rooms, per_tick)
    off = np.repeat(trajectory.off, per_tick)
    walking = speed > 0
    in_kitchen = (rooms == ROOM_INDEX[Room.KITCHEN]) & ~walking

    signal = np.zeros((n, len(WEARABLES), 3))
    signal[:, :, 2] = config.GRAVITY

    gait = config.WALK_AMPLITUDE * speed * np.sin(2 * np.pi * config.WALK_FREQ_HZ * t)
    signal[:, :, 0] += gait[:, None]
    signal[:, :, 2] += 0.5 * gait[:, None]

    envelope = (np.sin(2 * np.pi * 0.1 * t) > 0).astype(float)
    burst = config.KITCHEN_BURST_AMPLITUDE * envelope * np.sin(2 * np.pi * config.KITCHEN_BURST_FREQ_HZ * t)
    wrist_gain = np.array([0.3, 1.0])
    signal[:, :, 1] += np.where(in_kitchen, burst, 0.0)[:, None] * wrist_gain[None, :]

    idle = ~walking & ~in_kitchen
    if config.DWELL_ACCEL_STD > 0:
        signal[idle] += rng.normal(0.0, config.DWELL_ACCEL_STD, size=signal[idle].shape)

    if profile.tremor_amplitude > 0:
        gain = np.where(off, config.OFF_TREMOR_GAIN, 1.0)
        phase = rng.uniform(0, 2 * np.pi, size=len(WEARABLES))
        tremor = profile.tremor_amplitude * gain[:, None] * np.sin(
            2 * np.pi * profile.tremor_frequency * t[:, None] + phase[None, :]
        )
        signal[:, :, 0] += tremor
        signal[:, :, 1] += tremor

    if config.ACCEL_NOISE_STD > 0:
        signal += rng.normal(0.0, config.ACCEL_NOISE_STD, size=signal.shape)

    signal = np.round(signal, 4)
    return pd.DataFrame({
        "timestamp_ms": np.repeat(ts, len(WEARABLES)),
        "wearable": np.tile(np.array(WEARABLES), n),
        "x": signal[:, :, 0].ravel(),
        "y": signal[:, :, 1].ravel(),
        "z": signal[:, :, 2].ravel(),
    }, columns=ACCEL_COLUMNS)


# ---------------------------------------------------------------------------
# Cohort
# ---------------------------------------------------------------------------


def sample_profile(participant: str, group: Group, rng: np.random.Generator, config: Settings = default_settings) -> ParticipantProfile:
    """Draw one participant's behavioural and demographic parameters."""
    dwell = {
        Room(name): mean * rng.uniform(1 - config.DWELL_JITTER, 1 + config.DWELL_JITTER)
        for name, mean in sorted(config.DWELL_MEAN_S.items())
    }
    age = float(rng.uniform(55, 80))
    gender = "F" if rng.random() < 0.5 else "M"
    if group == Group.HC:
        speed = float(rng.uniform(*config.WALK_SPEED_HC))
        updrs = float(rng.uniform(0, 5))
        return ParticipantProfile(
            id=participant,
            group=group,
            walk_speed_on=speed,
            walk_speed_off=speed,
            dwell_mean_s=dwell,
            demographics=Demographics(age=age, gender=gender, years_since_diagnosis=0.0,
                                      updrs_on=updrs, updrs_off=updrs),
        )
    speed_on = float(rng.uniform(*config.WALK_SPEED_PD_ON))
    updrs_on = float(rng.uniform(15, 40))
    return ParticipantProfile(
        id=participant,
        group=group,
        tremor_amplitude=float(rng.uniform(*config.TREMOR_AMPLITUDE_PD)),
        tremor_frequency=float(rng.uniform(*config.TREMOR_FREQ_HZ)),
        walk_speed_on=speed_on,
        walk_speed_off=speed_on * float(rng.uniform(*config.OFF_SLOWDOWN)),
        dwell_mean_s=dwell,
        demographics=Demographics(age=age, gender=gender,
                                  years_since_diagnosis=float(rng.uniform(1, 15)),
                                  updrs_on=updrs_on, updrs_off=updrs_on + float(rng.uniform(5, 20))),
    )


def sample_schedule(participant: str, days: int, rng: np.random.Generator, config: Settings = default_settings) -> MedicationSchedule:
    """Every slot ON except one uniformly chosen OFF slot."""
    keys = [(d, s) for d in range(1, days + 1) for s in range(config.slots_per_day)]
    off = keys[int(rng.integers(len(keys)))]
    return MedicationSchedule(
        participant=participant,
        windows=[
            ScheduleWindow(day=d, slot=s, state=MedState.OFF if (d, s) == off else MedState.ON)
            for d, s in keys
        ],
    )


class Cohort:
    """A simulated cohort: the manifest plus lazily generated per-day traces."""

    def __init__(self, manifest: CohortManifest, config: Settings = default_settings):
        self.manifest = manifest
        self.config = config

    @property
    def participants(self) -> List[str]:
        return self.manifest.participants()

    def schedule(self, participant: str) -> Optional[MedicationSchedule]:
        return self.manifest.schedules.get(participant)

    def simulate_day(self, participant: str, day: int) -> Tuple[RawTrace, Trajectory]:
        """Generate one participant-day; pure function of (seed, participant, day)."""
        config = self.config
        profile = self.manifest.profile(participant)
        schedule = self.schedule(participant)
        seed = self.manifest.seed
        duration_s = (config.DAY_END_HOUR - config.DAY_START_HOUR) * 3600
        trajectory = simulate_trajectory(
            profile, schedule, duration_s,
            seed=seed_sequence(seed, "simulation", participant, day, "trajectory"),
            layout=self.manifest.layout,
            start_ms=day_start_ms(day, config),
            config=config,
        )
        rssi = synthesize_rssi(trajectory, self.manifest.layout,
                               seed_sequence(seed, "simulation", participant, day, "rssi"), config)
        accel = synthesize_accel(trajectory, profile, schedule,
                                 seed_sequence(seed, "simulation", participant, day, "accel"), config)
        return RawTrace(participant=participant, rssi=rssi, accel=accel, truth=trajectory.truth()), trajectory

    def iter_traces(self) -> Iterator[RawTrace]:
        """Yield one RawTrace per (participant, day), generated on demand."""
        for participant in self.participants:
            for day in range(1, self.manifest.days + 1):
                yield self.simulate_day(participant, day)[0]


def generate_cohort(n_pairs: int, days: int, seed: int, config: Settings = default_settings) -> Cohort:
    """
    Sample profiles and schedules for `n_pairs` PD/HC pairs over `days` days.

    Args:
        n_pairs: Number of PD/HC pairs
        days: Simulated days per participant
        seed: Root seed
        config: Settings

    Returns:
        Cohort: Manifest with lazily generated traces
    """
    if n_pairs < 1 or days < 1:
        raise ValueError(f"n_pairs and days must be >= 1, got {n_pairs} and {days}")
    rng = sub_rng(seed, "simulation", "cohort")
    profiles, schedules, pairs = [], {}, []
    for i in range(1, n_pairs + 1):
        pd_id, hc_id = f"PD{i:02d}", f"HC{i:02d}"
        profiles.append(sample_profile(pd_id, Group.PD, rng, config))
        profiles.append(sample_profile(hc_id, Group.HC, rng, config))
        schedules[pd_id] = sample_schedule(pd_id, days, rng, config)
        pairs.append((pd_id, hc_id))
    manifest = CohortManifest(
        seed=seed,
        n_pairs=n_pairs,
        days=days,
        layout=build_default_layout(),
        profiles=profiles,
        schedules=schedules,
        pairs=pairs,
    )
    logger.info(f"Generated cohort of {len(profiles)} participants over {days} day(s)")
    return Cohort(manifest, config)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def trace_paths(root: Path, participant: str, day: int) -> Dict[str, Path]:
    base = Path(root) / participant
    return {kind: base / f"day{day}_{kind}.csv.gz" for kind in ("rssi", "accel", "truth")}


def _write_participant(cohort: Cohort, root: Path, participant: str) -> Dict[str, int]:
    counts = {"rssi_packets": 0, "accel_samples": 0, "ticks": 0}
    (root / participant).mkdir(parents=True, exist_ok=True)
    for day in range(1, cohort.manifest.days + 1):
        trace, _ = cohort.simulate_day(participant, day)
        paths = trace_paths(root, participant, day)
        write_table(trace.rssi, paths["rssi"], "rssi")
        write_table(trace.accel, paths["accel"], "accel")
        write_table(trace.truth, paths["truth"], "truth")
        counts["rssi_packets"] += len(trace.rssi)
        counts["accel_samples"] += len(trace.accel)
        counts["ticks"] += len(trace.truth)
    return counts


def write_cohort(cohort: Cohort, out_dir: Path, n_jobs: int = 1) -> Dict[str, Dict[str, int]]:
    """
    Serialize the cohort manifest and every participant-day trace.

    Returns:
        dict: Per-participant packet, sample and tick counts
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / COHORT_FILE).write_text(cohort.manifest.model_dump_json(indent=2) + "\n")
    results = Parallel(n_jobs=n_jobs)(
        delayed(_write_participant)(cohort, out_dir, pid) for pid in cohort.participants
    )
    summary = dict(zip(cohort.participants, results))
    logger.info(f"Wrote {len(summary)} trace sets to {out_dir}")
    return summary


def read_cohort_manifest(data_dir: Path) -> CohortManifest:
    path = Path(data_dir) / COHORT_FILE
    if not path.is_file():
        raise MissingArtifactError(f"Missing cohort manifest {path}; run `simulate` first")
    return CohortManifest.model_validate_json(path.read_text())


def read_trace(data_dir: Path, participant: str, day: int) -> RawTrace:
    """Load one participant-day written by write_cohort."""
    paths = trace_paths(data_dir, participant, day)
    return RawTrace(
        participant=participant,
        rssi=read_table(paths["rssi"], "rssi"),
        accel=read_table(paths["accel"], "accel"),
        truth=read_table(paths["truth"], "truth"),
    )


def read_truth(data_dir: Path, participant: str, days: int) -> pd.DataFrame:
    """Concatenated room truth of every day of one participant."""
    frames = [read_table(trace_paths(data_dir, participant, d)["truth"], "truth") for d in range(1, days + 1)]
    return pd.concat(frames, ignore_index=True)[TRUTH_COLUMNS]

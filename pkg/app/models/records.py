"""
Array-backed records passed between the simulator, the pipeline and the models.
Kept as dataclasses over numpy arrays; validated schemas live in schemas.py.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from app.models.schemas import ROOMS

RSSI_COLUMNS = ["timestamp_ms", "wearable", "ap", "dbm"]
ACCEL_COLUMNS = ["timestamp_ms", "wearable", "x", "y", "z"]
TRUTH_COLUMNS = ["timestamp_ms", "room"]
POSITION_COLUMNS = ["timestamp_ms", "x", "y"]

WEARABLES = ("left", "right")
N_APS = 10


def rssi_channel_names(ap_ids: Sequence[int] = tuple(range(1, N_APS + 1))) -> List[str]:
    """Wearable-major RSSI channel order: left_ap1..left_apN, right_ap1..right_apN."""
    return [f"{w}_ap{ap}" for w in WEARABLES for ap in ap_ids]


def accel_channel_names() -> List[str]:
    """Wearable-major accelerometer channel order: left_x, left_y, left_z, right_x, ..."""
    return [f"{w}_{axis}" for w in WEARABLES for axis in ("x", "y", "z")]


@dataclass
class Trajectory:
    """Body path at the radio tick rate with room truth and walking speed."""
    timestamps_ms: np.ndarray
    x: np.ndarray
    y: np.ndarray
    rooms: np.ndarray
    speed: np.ndarray
    off: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps_ms)

    def positions(self) -> pd.DataFrame:
        return pd.DataFrame({"timestamp_ms": self.timestamps_ms, "x": self.x, "y": self.y})

    def truth(self) -> pd.DataFrame:
        return pd.DataFrame({
            "timestamp_ms": self.timestamps_ms,
            "room": [ROOMS[i].value for i in self.rooms],
        })


@dataclass
class RawTrace:
    """Sensor streams and room truth of one participant (one day or more)."""
    participant: str
    rssi: pd.DataFrame
    accel: pd.DataFrame
    truth: pd.DataFrame


@dataclass
class DenseStreams:
    """Synchronised 5 Hz streams: imputed RSSI, resampled accelerometry, label indices (-1 = unlabelled)."""
    timestamps_ms: np.ndarray
    rssi: np.ndarray
    accel: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.timestamps_ms)


@dataclass
class SensorWindow:
    """One fixed-length synchronised window with per-step labels."""
    rssi: np.ndarray
    accel: Optional[np.ndarray]
    labels: np.ndarray
    participant: str
    start_ms: int
    rssi_channels: List[str] = field(default_factory=rssi_channel_names)
    accel_channels: List[str] = field(default_factory=accel_channel_names)

    @property
    def annotated(self) -> bool:
        return bool(np.all(self.labels >= 0))


@dataclass
class WindowSet:
    """Stacked windows, the unit the models train and predict on."""
    rssi: np.ndarray
    accel: Optional[np.ndarray]
    labels: np.ndarray
    participants: np.ndarray
    start_ms: np.ndarray
    rssi_channels: List[str]
    accel_channels: List[str]

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, index) -> "WindowSet":
        return WindowSet(
            rssi=self.rssi[index],
            accel=None if self.accel is None else self.accel[index],
            labels=self.labels[index],
            participants=self.participants[index],
            start_ms=self.start_ms[index],
            rssi_channels=list(self.rssi_channels),
            accel_channels=list(self.accel_channels),
        )

    def windows(self) -> List[SensorWindow]:
        return [
            SensorWindow(
                rssi=self.rssi[i],
                accel=None if self.accel is None else self.accel[i],
                labels=self.labels[i],
                participant=str(self.participants[i]),
                start_ms=int(self.start_ms[i]),
                rssi_channels=list(self.rssi_channels),
                accel_channels=list(self.accel_channels),
            )
            for i in range(len(self))
        ]

    @classmethod
    def from_windows(cls, windows: Sequence[SensorWindow]) -> "WindowSet":
        if not windows:
            raise ValueError("cannot stack an empty list of windows")
        first = windows[0]
        return cls(
            rssi=np.stack([w.rssi for w in windows]),
            accel=None if first.accel is None else np.stack([w.accel for w in windows]),
            labels=np.stack([w.labels for w in windows]),
            participants=np.array([w.participant for w in windows]),
            start_ms=np.array([w.start_ms for w in windows], dtype=np.int64),
            rssi_channels=list(first.rssi_channels),
            accel_channels=list(first.accel_channels) if first.accel is not None else [],
        )

    @classmethod
    def concat(cls, sets: Sequence["WindowSet"]) -> "WindowSet":
        sets = [s for s in sets if len(s)]
        if not sets:
            raise ValueError("cannot concatenate an empty list of window sets")
        has_accel = sets[0].accel is not None
        return cls(
            rssi=np.concatenate([s.rssi for s in sets]),
            accel=np.concatenate([s.accel for s in sets]) if has_accel else None,
            labels=np.concatenate([s.labels for s in sets]),
            participants=np.concatenate([s.participants for s in sets]),
            start_ms=np.concatenate([s.start_ms for s in sets]),
            rssi_channels=list(sets[0].rssi_channels),
            accel_channels=list(sets[0].accel_channels),
        )


@dataclass
class RoomSequence:
    """Per-step room indices with timestamps for one participant."""
    participant: str
    timestamps_ms: np.ndarray
    rooms: np.ndarray

    def __len__(self) -> int:
        return len(self.rooms)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "timestamp_ms": self.timestamps_ms,
            "room": [ROOMS[i].value for i in self.rooms],
        })

    @classmethod
    def from_frame(cls, participant: str, df: pd.DataFrame) -> "RoomSequence":
        index = {room.value: i for i, room in enumerate(ROOMS)}
        return cls(
            participant=participant,
            timestamps_ms=df["timestamp_ms"].to_numpy(dtype=np.int64),
            rooms=df["room"].map(index).to_numpy(dtype=np.int64),
        )

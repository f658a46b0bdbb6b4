"""
Pydantic models for the toolkit's domain types.
Defines the validated structures exchanged between simulation, training and reporting.
"""

from enum import Enum
from itertools import product
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

FORMAT_VERSION = 1


class Room(str, Enum):
    """Labelled ground-floor zones, in label-index order."""
    KITCHEN = "kitchen"
    HALLWAY = "hallway"
    DINING = "dining"
    LIVING = "living"
    STAIRS = "stairs"
    PORCH = "porch"


ROOMS: Tuple[Room, ...] = tuple(Room)
ROOM_INDEX: Dict[Room, int] = {room: i for i, room in enumerate(ROOMS)}
HALLWAY_INDEX = ROOM_INDEX[Room.HALLWAY]

# Unordered room pairs whose hallway-mediated transitions are gait features
TRACKED_PAIRS: Tuple[Tuple[Room, Room], ...] = (
    (Room.KITCHEN, Room.LIVING),
    (Room.KITCHEN, Room.DINING),
    (Room.DINING, Room.LIVING),
)
PAIR_LABELS: Dict[Tuple[Room, Room], str] = {
    (Room.KITCHEN, Room.LIVING): "kitchen_living",
    (Room.KITCHEN, Room.DINING): "kitchen_dining",
    (Room.DINING, Room.LIVING): "dining_living",
}


class Group(str, Enum):
    PD = "PD"
    HC = "HC"


class MedState(str, Enum):
    ON = "ON"
    OFF = "OFF"


class Wearable(str, Enum):
    LEFT = "left"
    RIGHT = "right"


class Variant(str, Enum):
    """Localisation model variants."""
    MDCSA = "mdcsa"
    MDCSA_4APS = "mdcsa-4aps"
    MDCSA_RSSI = "mdcsa-rssi"
    MDCSA_4APS_RSSI = "mdcsa-4aps-rssi"
    RF = "rf"

    @property
    def uses_accel(self) -> bool:
        return self in (Variant.MDCSA, Variant.MDCSA_4APS, Variant.RF)

    @property
    def uses_top_aps(self) -> bool:
        return self in (Variant.MDCSA_4APS, Variant.MDCSA_4APS_RSSI)

    @property
    def is_network(self) -> bool:
        return self is not Variant.RF


class ProtocolName(str, Enum):
    ALL_HC = "ALL-HC"
    LOO_HC = "LOO-HC"
    LOO_PD = "LOO-PD"
    FOUR_MIN_HC = "4m-HC"
    FOUR_MIN_PD = "4m-PD"


class FeatureSource(str, Enum):
    """Where medication-state features come from."""
    GAIT_FROM_MODEL = "gait-from-model"
    GAIT_FROM_TRUTH = "gait-from-truth"
    DEMOGRAPHIC = "demographic"
    DEMOGRAPHIC_NO_UPDRS = "demographic-no-updrs"


# ---------------------------------------------------------------------------
# House and cohort
# ---------------------------------------------------------------------------


class RoomGeometry(BaseModel):
    """One labelled zone and its floor polygon (metres)."""
    id: Room
    polygon: List[Tuple[float, float]] = Field(..., min_length=3)

    @property
    def centroid(self) -> Tuple[float, float]:
        xs = [p[0] for p in self.polygon]
        ys = [p[1] for p in self.polygon]
        return (sum(xs) / len(xs), sum(ys) / len(ys))


class AccessPoint(BaseModel):
    """Fixed receiver; `room` is the labelled zone under it."""
    id: int = Field(..., ge=1, le=10)
    x: float
    y: float
    floor: int = Field(0, ge=0)
    room: Room


class HouseLayout(BaseModel):
    """Ground-floor zones, access points and door topology."""
    rooms: List[RoomGeometry]
    access_points: List[AccessPoint]
    hallway_id: Room = Room.HALLWAY
    adjacency: List[Tuple[Room, Room]]
    footprint: List[Tuple[float, float]] = Field(..., min_length=3)

    @model_validator(mode="after")
    def validate_topology(self):
        """Six zones, ten APs, every door goes through the hallway."""
        ids = [r.id for r in self.rooms]
        if len(ids) != len(ROOMS) or set(ids) != set(ROOMS):
            raise ValueError(f"layout must define exactly the rooms {[r.value for r in ROOMS]}")
        if len(self.access_points) != 10 or len({ap.id for ap in self.access_points}) != 10:
            raise ValueError("layout must define exactly 10 uniquely numbered access points")
        for a, b in self.adjacency:
            if self.hallway_id not in (a, b) or a == b:
                raise ValueError(f"door {a.value}-{b.value} does not go through the hallway")
        linked = {b if a == self.hallway_id else a for a, b in self.adjacency}
        missing = set(ROOMS) - {self.hallway_id} - linked
        if missing:
            raise ValueError(f"hallway is not adjacent to {sorted(m.value for m in missing)}")
        return self

    def room(self, room_id: Room) -> RoomGeometry:
        return next(r for r in self.rooms if r.id == room_id)

    def neighbours(self, room_id: Room) -> List[Room]:
        out = []
        for a, b in self.adjacency:
            if a == room_id:
                out.append(b)
            elif b == room_id:
                out.append(a)
        return sorted(out, key=lambda r: ROOM_INDEX[r])


class Demographics(BaseModel):
    age: float = Field(..., gt=0)
    gender: str = Field(..., pattern="^(F|M)$")
    years_since_diagnosis: float = Field(0.0, ge=0)
    updrs_on: float = Field(..., ge=0)
    updrs_off: float = Field(..., ge=0)

    @model_validator(mode="after")
    def validate_updrs(self):
        if self.updrs_off < self.updrs_on:
            raise ValueError("updrs_off must be >= updrs_on")
        return self


class ParticipantProfile(BaseModel):
    """Behavioural and demographic parameters of one simulated participant."""
    id: str = Field(..., min_length=1)
    group: Group
    tremor_amplitude: float = Field(0.0, ge=0)
    tremor_frequency: float = Field(5.0, gt=0)
    walk_speed_on: float = Field(..., gt=0)
    walk_speed_off: float = Field(..., gt=0)
    dwell_mean_s: Dict[Room, float]
    demographics: Demographics

    @model_validator(mode="after")
    def validate_group_constraints(self):
        if self.group == Group.HC and self.tremor_amplitude != 0:
            raise ValueError("healthy controls have no tremor")
        if self.group == Group.PD and self.walk_speed_off > self.walk_speed_on:
            raise ValueError("walk_speed_off must not exceed walk_speed_on")
        if Room.HALLWAY in self.dwell_mean_s:
            raise ValueError("the hallway is traversed, never dwelt in")
        if any(v <= 0 for v in self.dwell_mean_s.values()):
            raise ValueError("dwell means must be positive")
        return self


class ScheduleWindow(BaseModel):
    day: int = Field(..., ge=1)
    slot: int = Field(..., ge=0)
    state: MedState


class MedicationSchedule(BaseModel):
    """Per-slot medication state of one PD participant; exactly one OFF slot."""
    participant: str
    windows: List[ScheduleWindow]

    @model_validator(mode="after")
    def validate_single_off(self):
        keys = [(w.day, w.slot) for w in self.windows]
        if not keys or len(set(keys)) != len(keys):
            raise ValueError("schedule windows must be non-empty and unique per (day, slot)")
        n_off = sum(w.state == MedState.OFF for w in self.windows)
        if n_off != 1:
            raise ValueError(f"schedule must contain exactly one OFF window, found {n_off}")
        return self

    @property
    def off_window(self) -> ScheduleWindow:
        return next(w for w in self.windows if w.state == MedState.OFF)

    def state_at(self, day: int, slot: int) -> MedState:
        for w in self.windows:
            if w.day == day and w.slot == slot:
                return w.state
        return MedState.ON


class CohortManifest(BaseModel):
    """Everything about a simulated cohort except the sensor streams."""
    format_version: int = FORMAT_VERSION
    seed: int
    n_pairs: int = Field(..., ge=1)
    days: int = Field(..., ge=1)
    layout: HouseLayout
    profiles: List[ParticipantProfile]
    schedules: Dict[str, MedicationSchedule]
    pairs: List[Tuple[str, str]]

    @model_validator(mode="after")
    def validate_schedules(self):
        groups = {p.id: p.group for p in self.profiles}
        for pid, group in groups.items():
            if group == Group.PD and pid not in self.schedules:
                raise ValueError(f"PD participant {pid} has no schedule")
            if group == Group.HC and pid in self.schedules:
                raise ValueError(f"healthy control {pid} must not have a schedule")
        return self

    def profile(self, participant: str) -> ParticipantProfile:
        return next(p for p in self.profiles if p.id == participant)

    def participants(self, group: Optional[Group] = None) -> List[str]:
        return [p.id for p in self.profiles if group is None or p.group == group]


# ---------------------------------------------------------------------------
# Preprocessing, model and training configuration
# ---------------------------------------------------------------------------


class NormalizationStats(BaseModel):
    """Per-channel z-score statistics fit on a training split."""
    channels: List[str]
    mean: List[float]
    std: List[float]

    @model_validator(mode="after")
    def validate_shapes(self):
        if not (len(self.channels) == len(self.mean) == len(self.std)):
            raise ValueError("channels, mean and std must have equal length")
        if any(s <= 0 for s in self.std):
            raise ValueError("std must be positive for every channel")
        return self


class MdcsaConfig(BaseModel):
    """Shape and regularisation hyperparameters of the network."""
    d: int = Field(..., gt=0)
    kernels: List[int] = [1, 4, 7]
    dropout: float = Field(0.15, ge=0, lt=1)
    n_rooms: int = Field(len(ROOMS), ge=2)
    rssi_channels: int = Field(20, ge=1)
    accel_channels: int = Field(6, ge=0)
    window_len: int = Field(25, ge=1)
    referenced_room: int = HALLWAY_INDEX

    @field_validator("kernels")
    @classmethod
    def validate_kernels(cls, v):
        if not v or any(k < 1 for k in v):
            raise ValueError("kernels must be non-empty, each >= 1")
        return v

    @property
    def uses_accel(self) -> bool:
        return self.accel_channels > 0


class HyperParams(BaseModel):
    d: int = Field(..., gt=0)
    epochs: int = Field(..., gt=0)
    lr: float = Field(..., gt=0)


class TrainConfig(BaseModel):
    """Training grid and optimiser settings."""
    grid_d: List[int] = [128, 256]
    grid_epochs: List[int] = [200, 300]
    grid_lr: List[float] = [0.01, 0.0001]
    dropout: float = Field(0.15, ge=0, lt=1)
    patience: int = Field(20, ge=1)
    batch_size: int = Field(32, ge=1)
    val_fraction: float = Field(0.1, gt=0, lt=1)
    lookahead_k: int = Field(5, ge=1)
    lookahead_alpha: float = Field(0.5, gt=0, le=1)
    kernels: List[int] = [1, 4, 7]
    seed: int = 42

    @field_validator("grid_d", "grid_epochs", "grid_lr")
    @classmethod
    def validate_grid(cls, v):
        if not v or any(x <= 0 for x in v):
            raise ValueError("grid values must be positive and non-empty")
        return v

    def grid(self) -> Iterator[HyperParams]:
        """Grid points in first-in-grid order (d, then epochs, then lr)."""
        for d, epochs, lr in product(self.grid_d, self.grid_epochs, self.grid_lr):
            yield HyperParams(d=d, epochs=epochs, lr=lr)

    @classmethod
    def from_settings(cls, settings) -> "TrainConfig":
        return cls(
            grid_d=settings.GRID_D,
            grid_epochs=settings.GRID_EPOCHS,
            grid_lr=settings.GRID_LR,
            dropout=settings.DROPOUT,
            patience=settings.PATIENCE,
            batch_size=settings.BATCH_SIZE,
            val_fraction=settings.VAL_FRACTION,
            lookahead_k=settings.LOOKAHEAD_K,
            lookahead_alpha=settings.LOOKAHEAD_ALPHA,
            kernels=settings.KERNELS,
            seed=settings.SEED,
        )


class RandomForestParams(BaseModel):
    n_trees: int = Field(200, ge=1)
    min_leaf: int = Field(1, ge=1)
    warm_start: bool = False


class FoldSpec(BaseModel):
    """Participants feeding one cross-validation fold."""
    fold_id: str
    train_participants: List[str]
    test_participants: List[str]
    budget_windows: Optional[int] = None

    @model_validator(mode="after")
    def validate_disjoint(self):
        overlap = set(self.train_participants) & set(self.test_participants)
        if overlap:
            raise ValueError(f"fold {self.fold_id} tests on training participants {sorted(overlap)}")
        return self


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

class FoldReport(BaseModel):
    """Metrics of one fold of one protocol for one variant (all in [0, 1])."""
    protocol: ProtocolName
    variant: Variant
    fold_id: str
    weighted_precision: float = Field(..., ge=0, le=1)
    weighted_f1: float = Field(..., ge=0, le=1)
    hallway_precision: float = Field(..., ge=0, le=1)
    hallway_f1: float = Field(..., ge=0, le=1)
    med_f1: Optional[float] = Field(None, ge=0, le=1)
    med_auroc: Optional[float] = Field(None, ge=0, le=1)


class MedFoldReport(BaseModel):
    """Medication-state metrics of one leave-one-participant-out fold."""
    source: FeatureSource
    fold_id: str
    f1: float = Field(..., ge=0, le=1)
    auroc: Optional[float] = Field(None, ge=0, le=1)


class Transition(BaseModel):
    """A hallway-mediated passage between two tracked rooms."""
    from_room: Room
    to_room: Room
    start_ms: int
    end_ms: int
    duration_s: float = Field(..., gt=0, le=60)

    @model_validator(mode="after")
    def validate_endpoints(self):
        tracked = {Room.KITCHEN, Room.DINING, Room.LIVING}
        if self.from_room == self.to_room:
            raise ValueError("a transition joins two distinct rooms")
        if self.from_room not in tracked or self.to_room not in tracked:
            raise ValueError("transition endpoints must be kitchen, dining or living")
        return self

    @property
    def pair(self) -> Tuple[Room, Room]:
        """Direction-agnostic pair key, as listed in TRACKED_PAIRS."""
        for pair in TRACKED_PAIRS:
            if {self.from_room, self.to_room} == set(pair):
                return pair
        raise ValueError("untracked pair")


GAIT_FEATURE_COLUMNS = [
    "kitchen_living_mean", "kitchen_dining_mean", "dining_living_mean",
    "kitchen_living_count", "kitchen_dining_count", "dining_living_count",
]


class GaitFeatureRow(BaseModel):
    """One 4-hour slot of in-home gait-speed features."""
    participant: str
    day: int = Field(..., ge=1)
    slot: int = Field(..., ge=0)
    kitchen_living_mean: float = Field(..., gt=0, le=60)
    kitchen_dining_mean: float = Field(..., gt=0, le=60)
    dining_living_mean: float = Field(..., gt=0, le=60)
    kitchen_living_count: int = Field(..., ge=0)
    kitchen_dining_count: int = Field(..., ge=0)
    dining_living_count: int = Field(..., ge=0)
    med_state: MedState

    def features(self) -> List[float]:
        return [float(getattr(self, c)) for c in GAIT_FEATURE_COLUMNS]


class MedSample(BaseModel):
    """Feature vector with its medication-state label."""
    participant: str
    features: List[float] = Field(..., min_length=1)
    label: MedState


class RankDiagram(BaseModel):
    """Average ranks and cliques of statistically indistinguishable models."""
    models: List[str]
    average_ranks: List[float]
    cliques: List[List[str]]


class RunManifest(BaseModel):
    """Provenance record written by every artifact-producing command."""
    format_version: int = FORMAT_VERSION
    command: str
    config_path: Optional[str] = None
    seed: int
    inputs: Dict[str, str] = {}
    input_manifests: List[str] = []
    outputs: List[str] = []
    wall_clock_s: float = Field(0.0, ge=0)


class WilcoxonResult(BaseModel):
    statistic: float
    z: float
    p_value: float = Field(..., ge=0, le=1)
    n: int = Field(..., ge=1)


class FriedmanResult(BaseModel):
    statistic: float = Field(..., ge=0)
    p_value: float = Field(..., ge=0, le=1)
    average_ranks: List[float]

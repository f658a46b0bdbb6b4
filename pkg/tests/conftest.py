"""
Shared fixtures: small settings, synthetic window sets and participant profiles.
"""

import numpy as np
import pytest

from app.core.config import Settings
from app.models.records import WindowSet, accel_channel_names, rssi_channel_names
from app.models.schemas import Demographics, Group, ParticipantProfile, Room


@pytest.fixture
def tiny_settings():
    """One annotated half hour inside a one-hour day with a single slot and a one-point grid."""
    return Settings(
        DAY_START_HOUR=10,
        DAY_END_HOUR=11,
        SLOT_HOURS=1,
        ANNOTATION_START_HOUR=10.0,
        ANNOTATION_HOURS=0.5,
        GRID_D=[8],
        GRID_EPOCHS=[2],
        GRID_LR=[0.01],
        KERNELS=[1, 2],
        BATCH_SIZE=16,
        RF_GRID_TREES=[5],
        RF_GRID_MIN_LEAF=[1],
        RF_GRID_WARM_START=[False],
        MED_N_TREES=10,
        FOLD_MED_COLUMNS=False,
    )


@pytest.fixture
def make_window_set():
    """Factory for random window sets whose RSSI channels carry the labels as a signal."""

    def build(n=8, participant="PD01", labels=None, window=25, seed=0, start_ms=0, accel=True):
        rng = np.random.default_rng(seed)
        if labels is None:
            labels = rng.integers(0, 6, size=(n, window))
        labels = np.asarray(labels, dtype=np.int64)
        n = labels.shape[0]
        rssi = rng.normal(-80.0, 2.0, size=(n, window, 20))
        for room in range(6):
            rssi[..., room][labels == room] += 30.0
        return WindowSet(
            rssi=rssi,
            accel=rng.normal(0.0, 1.0, size=(n, window, 6)) if accel else None,
            labels=labels,
            participants=np.full(n, participant),
            start_ms=start_ms + np.arange(n, dtype=np.int64) * window * 200,
            rssi_channels=rssi_channel_names(),
            accel_channels=accel_channel_names() if accel else [],
        )

    return build


def _profile(pid, group, tremor=0.0, speed_on=1.0, speed_off=1.0, dwell=300.0):
    return ParticipantProfile(
        id=pid,
        group=group,
        tremor_amplitude=tremor,
        tremor_frequency=5.0,
        walk_speed_on=speed_on,
        walk_speed_off=speed_off,
        dwell_mean_s={r: dwell for r in Room if r != Room.HALLWAY},
        demographics=Demographics(age=70.0, gender="F", years_since_diagnosis=5.0 if group == Group.PD else 0.0,
                                  updrs_on=20.0, updrs_off=30.0),
    )


@pytest.fixture
def hc_profile():
    return _profile("HC01", Group.HC)


@pytest.fixture
def pd_profile():
    return _profile("PD01", Group.PD, tremor=1.0, speed_on=1.0, speed_off=0.5, dwell=5.0)

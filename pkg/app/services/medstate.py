"""
Medication-state (ON/OFF) classification from gait or demographic features.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.ensemble import RandomForestClassifier
from sklearn.preprocessing import StandardScaler

from app.core.artifacts import write_table
from app.core.config import Settings, settings as default_settings
from app.core.errors import InfeasibleProtocolError
from app.core.seeding import sub_seed
from app.ml.forest import rf_fit, vote_fraction
from app.models.schemas import (
    CohortManifest,
    FeatureSource,
    GaitFeatureRow,
    Group,
    MedFoldReport,
    MedSample,
    MedState,
    ParticipantProfile,
    RandomForestParams,
)
from app.services.metrics import auroc, weighted_metrics

logger = logging.getLogger(__name__)

OFF_THRESHOLD = 0.5


def gait_samples(rows: Sequence[GaitFeatureRow]) -> List[MedSample]:
    return [MedSample(participant=r.participant, features=r.features(), label=r.med_state) for r in rows]


def demographic_features(profile: ParticipantProfile, state: MedState, include_updrs: bool = True) -> List[float]:
    """Age, gender (F=1), years since diagnosis and, optionally, the state-matched UPDRS-III score."""
    d = profile.demographics
    features = [d.age, 1.0 if d.gender == "F" else 0.0, d.years_since_diagnosis]
    if include_updrs:
        features.append(d.updrs_off if state == MedState.OFF else d.updrs_on)
    return features


def demographic_samples(
    manifest: CohortManifest,
    include_updrs: bool = True,
    config: Settings = default_settings,
) -> List[MedSample]:
    """One sample per PD participant, day and slot, labelled from the schedule."""
    samples = []
    for pid in manifest.participants(Group.PD):
        profile, schedule = manifest.profile(pid), manifest.schedules[pid]
        for day in range(1, manifest.days + 1):
            for slot in range(config.slots_per_day):
                state = schedule.state_at(day, slot)
                samples.append(MedSample(
                    participant=pid,
                    features=demographic_features(profile, state, include_updrs),
                    label=state,
                ))
    return samples


def to_arrays(samples: Sequence[MedSample]) -> Tuple[np.ndarray, np.ndarray]:
    """Feature matrix and labels (1 = OFF)."""
    if not samples:
        raise ValueError("no medication samples")
    widths = {len(s.features) for s in samples}
    if len(widths) != 1:
        raise ValueError(f"samples disagree on feature width: {sorted(widths)}")
    X = np.array([s.features for s in samples], dtype=float)
    y = np.array([int(s.label == MedState.OFF) for s in samples])
    return X, y


@dataclass
class MedClassifier:
    """Per-feature z-scoring followed by a class-balanced forest."""
    scaler: StandardScaler
    forest: RandomForestClassifier

    def off_fraction(self, X: np.ndarray) -> np.ndarray:
        return vote_fraction(self.forest, self.scaler.transform(X), 1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.off_fraction(X) > OFF_THRESHOLD).astype(int)


def train_med_classifier(samples: Sequence[MedSample], params: RandomForestParams, seed: int) -> MedClassifier:
    """
    Fit the ON/OFF forest with inverse-frequency class weights.

    Raises:
        ValueError: Training data holds a single class
    """
    X, y = to_arrays(samples)
    if np.unique(y).size < 2:
        raise ValueError("medication classifier needs both ON and OFF samples to train")
    scaler = StandardScaler().fit(X)
    forest = rf_fit(scaler.transform(X), y, params, seed, class_weight="balanced")
    return MedClassifier(scaler=scaler, forest=forest)


def evaluate_med(classifier: MedClassifier, samples: Sequence[MedSample]) -> Tuple[float, Optional[float]]:
    """Weighted F1 at the vote threshold and AUROC of the OFF vote fraction (None with one class)."""
    X, y = to_arrays(samples)
    scores = classifier.off_fraction(X)
    _, f1 = weighted_metrics((scores > OFF_THRESHOLD).astype(int), y)
    return f1, auroc(scores, y)


def _run_fold(
    held_out: str,
    by_participant: Mapping[str, List[MedSample]],
    source: FeatureSource,
    params: RandomForestParams,
    seed: int,
) -> MedFoldReport:
    train = [s for pid, rows in by_participant.items() if pid != held_out for s in rows]
    classifier = train_med_classifier(train, params, sub_seed(seed, "bootstrap", "medstate", source.value, held_out))
    f1, area = evaluate_med(classifier, by_participant[held_out])
    logger.info(
        f"Medication fold {held_out}: F1 {f1:.4f}",
        extra={"source": source.value, "fold": held_out, "n_train": len(train),
               "n_test": len(by_participant[held_out])},
    )
    return MedFoldReport(source=source, fold_id=held_out, f1=f1, auroc=area)


def run_med_protocol(
    samples: Sequence[MedSample],
    source: FeatureSource,
    params: RandomForestParams,
    seed: int,
    n_jobs: int = 1,
) -> List[MedFoldReport]:
    """
    Leave one PD participant out at a time.

    Args:
        samples: Samples of every PD participant
        source: Feature source, recorded in each report
        params: Forest hyperparameters
        seed: Root seed
        n_jobs: Parallel folds

    Returns:
        list: One report per held-out participant, in participant order

    Raises:
        InfeasibleProtocolError: Fewer than two participants
    """
    by_participant: Dict[str, List[MedSample]] = {}
    for s in samples:
        by_participant.setdefault(s.participant, []).append(s)
    participants = sorted(by_participant)
    if len(participants) < 2:
        raise InfeasibleProtocolError(
            f"leave-one-participant-out needs at least 2 PD participants, got {len(participants)}"
        )
    return Parallel(n_jobs=n_jobs)(
        delayed(_run_fold)(pid, by_participant, source, params, seed) for pid in participants
    )


def med_reports_frame(reports: Sequence[MedFoldReport]) -> pd.DataFrame:
    return pd.DataFrame(
        [r.model_dump(mode="json") for r in reports],
        columns=["source", "fold_id", "f1", "auroc"],
    )


def write_med_reports(reports: Sequence[MedFoldReport], path: Path) -> Path:
    return write_table(med_reports_frame(reports), path, "med-reports")

"""
Room-level and binary classification metrics.
"""

from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import precision_recall_fscore_support, roc_auc_score

from app.models.schemas import HALLWAY_INDEX


def weighted_metrics(predictions: Sequence, truth: Sequence) -> Tuple[float, float]:
    """
    Support-weighted precision and F1 over the classes present.

    Args:
        predictions: Predicted labels
        truth: True labels, same length

    Returns:
        (precision, f1): Both in [0, 1]
    """
    pred = np.asarray(predictions).ravel()
    true = np.asarray(truth).ravel()
    if true.size == 0:
        raise ValueError("cannot score empty label sequences")
    if pred.shape != true.shape:
        raise ValueError(f"predictions and truth differ in length: {pred.size} vs {true.size}")
    precision, _, f1, _ = precision_recall_fscore_support(true, pred, average="weighted", zero_division=0)
    return float(precision), float(f1)


def hallway_metrics(predictions: Sequence, truth: Sequence, room: int = HALLWAY_INDEX) -> Tuple[float, float]:
    """Binary precision and F1 of one reference room against all others."""
    pred = np.asarray(predictions).ravel() == room
    true = np.asarray(truth).ravel() == room
    if true.size == 0:
        raise ValueError("cannot score empty label sequences")
    precision, _, f1, _ = precision_recall_fscore_support(
        true, pred, average="binary", pos_label=True, zero_division=0
    )
    return float(precision), float(f1)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> Optional[float]:
    """Area under the ROC curve; None when only one class is present."""
    labels = np.asarray(labels).ravel()
    if np.unique(labels).size < 2:
        return None
    return float(roc_auc_score(labels, np.asarray(scores, dtype=float).ravel()))

"""
Random-forest helpers shared by the localisation baseline and the medication classifier.
Gini-split forests from scikit-learn plus window flattening and vote fractions.
"""

from itertools import product
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np
from sklearn.ensemble import RandomForestClassifier
from sklearn.model_selection import GridSearchCV, StratifiedKFold
from sklearn.tree import DecisionTreeClassifier

from app.models.records import WindowSet
from app.models.schemas import RandomForestParams

logger = logging.getLogger(__name__)


def flatten_windows(ws: WindowSet) -> np.ndarray:
    """Concatenate the flattened RSSI and accelerometer blocks of every window."""
    parts = [ws.rssi.reshape(len(ws), -1)]
    if ws.accel is not None:
        parts.append(ws.accel.reshape(len(ws), -1))
    return np.concatenate(parts, axis=1)


def window_labels(labels: np.ndarray, n_classes: int) -> np.ndarray:
    """Most frequent step label per window; ties go to the lowest class index."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.zeros((labels.shape[0], n_classes), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(labels.shape[0]), labels.shape[1]), labels.ravel()), 1)
    return counts.argmax(axis=1)


def gini_impurity(y: Sequence, sample_weight: Optional[Sequence[float]] = None) -> float:
    """1 - sum_k p_k^2 over (weighted) class frequencies."""
    y = np.asarray(y)
    if y.size == 0:
        return 0.0
    w = np.ones(len(y)) if sample_weight is None else np.asarray(sample_weight, dtype=float)
    _, inverse = np.unique(y, return_inverse=True)
    p = np.bincount(inverse, weights=w) / w.sum()
    return float(1.0 - np.sum(p ** 2))


def root_split_gain(tree: DecisionTreeClassifier) -> float:
    """Impurity decrease of a fitted tree's root split (0 for a leaf-only tree)."""
    t = tree.tree_
    left, right = t.children_left[0], t.children_right[0]
    if left < 0:
        return 0.0
    n = t.weighted_n_node_samples
    children = (n[left] * t.impurity[left] + n[right] * t.impurity[right]) / n[0]
    return float(t.impurity[0] - children)


def rf_fit(
    X: np.ndarray,
    y: np.ndarray,
    params: RandomForestParams,
    seed: int,
    class_weight: Optional[str] = None,
) -> RandomForestClassifier:
    """
    Fit a bootstrap Gini forest.

    Args:
        X: Feature matrix
        y: Labels
        params: Tree count, minimum leaf size, warm-start flag
        seed: Bootstrap seed
        class_weight: None, or "balanced" for inverse-frequency weighting

    Returns:
        RandomForestClassifier: Fitted forest
    """
    model = RandomForestClassifier(
        n_estimators=params.n_trees,
        criterion="gini",
        min_samples_leaf=params.min_leaf,
        warm_start=params.warm_start,
        bootstrap=True,
        class_weight=class_weight,
        random_state=seed,
        n_jobs=1,
    )
    model.fit(X, y)
    return model


def rf_grid_search(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: List[int],
    min_leaf: List[int],
    warm_start: List[bool],
    seed: int,
    cv_folds: int = 3,
) -> Tuple[RandomForestClassifier, RandomForestParams]:
    """
    Pick forest hyperparameters by stratified cross-validated weighted F1, then refit on all data.
    Falls back to the first grid point when the data cannot support the folds.
    """
    grid = [RandomForestParams(n_trees=t, min_leaf=m, warm_start=w) for t, m, w in product(n_trees, min_leaf, warm_start)]
    _, class_counts = np.unique(y, return_counts=True)
    if len(class_counts) < 2 or class_counts.min() < cv_folds:
        logger.info("Skipping forest grid search: too few samples per class for cross-validation")
        best = grid[0]
        return rf_fit(X, y, best, seed), best

    search = GridSearchCV(
        RandomForestClassifier(criterion="gini", bootstrap=True, random_state=seed, n_jobs=1),
        param_grid={
            "n_estimators": list(n_trees),
            "min_samples_leaf": list(min_leaf),
            "warm_start": list(warm_start),
        },
        scoring="f1_weighted",
        cv=StratifiedKFold(n_splits=cv_folds, shuffle=True, random_state=seed),
        refit=True,
        n_jobs=1,
    )
    search.fit(X, y)
    p = search.best_params_
    best = RandomForestParams(n_trees=p["n_estimators"], min_leaf=p["min_samples_leaf"], warm_start=p["warm_start"])
    logger.info(f"Forest grid search picked {best.model_dump()} (cv weighted F1 {search.best_score_:.4f})")
    return search.best_estimator_, best


def rf_predict(model: RandomForestClassifier, X: np.ndarray) -> np.ndarray:
    """Majority-vote class per row."""
    return model.predict(X)


def vote_fraction(model: RandomForestClassifier, X: np.ndarray, label) -> np.ndarray:
    """Fraction of trees voting for `label` on every row (0 when the forest never saw it)."""
    classes = list(model.classes_)
    if label not in classes:
        return np.zeros(len(X))
    target = classes.index(label)
    votes = np.stack([tree.predict(X) for tree in model.estimators_])
    return (votes == target).mean(axis=0)

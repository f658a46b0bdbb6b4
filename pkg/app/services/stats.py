"""
Non-parametric statistics for comparing models and medication states:
Wilcoxon signed-rank, Friedman, Holm step-down and critical-difference ranking.
"""

from itertools import combinations
from typing import List, Sequence, Set, Tuple
import logging

import numpy as np
import pandas as pd
from scipy.stats import chi2, norm, rankdata
from statsmodels.stats.multitest import multipletests

from app.core.errors import UndefinedStatisticError
from app.models.schemas import FriedmanResult, RankDiagram, WilcoxonResult

logger = logging.getLogger(__name__)

ALTERNATIVES = ("two-sided", "greater", "less")


def wilcoxon_signed_rank(pairs: Sequence[Tuple[float, float]], alternative: str = "two-sided") -> WilcoxonResult:
    """
    Signed-rank test of a - b with the normal approximation.

    Zero differences are dropped, tied |differences| share average ranks, the
    variance is tie-corrected and a 0.5 continuity correction is applied.
    W is the rank sum of the positive differences.

    Args:
        pairs: (a, b) observations
        alternative: "two-sided", "greater" (a > b) or "less"

    Returns:
        WilcoxonResult: W, z, p and the number of nonzero differences

    Raises:
        UndefinedStatisticError: Every difference is zero
    """
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    values = np.asarray(pairs, dtype=float).reshape(-1, 2)
    if len(values) == 0:
        raise ValueError("need at least one pair")
    if np.isnan(values).any():
        raise ValueError("pairs must not contain NaN")
    d = values[:, 0] - values[:, 1]
    d = d[d != 0]
    if d.size == 0:
        raise UndefinedStatisticError("all differences are zero; the signed-rank statistic is undefined")

    n = d.size
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    _, ties = np.unique(np.abs(d), return_counts=True)
    variance = n * (n + 1) * (2 * n + 1) / 24.0 - float((ties ** 3 - ties).sum()) / 48.0
    centred = w_plus - n * (n + 1) / 4.0

    if alternative == "two-sided":
        correction = 0.5 * np.sign(centred)
    elif alternative == "greater":
        correction = 0.5
    else:
        correction = -0.5
    z = float((centred - correction) / np.sqrt(variance))

    if alternative == "two-sided":
        p = 2.0 * norm.sf(abs(z))
    elif alternative == "greater":
        p = norm.sf(z)
    else:
        p = norm.cdf(z)
    return WilcoxonResult(statistic=w_plus, z=z, p_value=float(min(1.0, p)), n=n)


def friedman_test(matrix: np.ndarray) -> FriedmanResult:
    """
    Friedman rank test over a folds x models score matrix (higher is better).

    Within each fold the best model gets rank 1; ties share average ranks and the
    statistic is divided by the usual tie correction 1 - sum(t^3 - t) / (n k (k^2 - 1)).
    A matrix whose every fold is a complete tie gives statistic 0 and p = 1.

    Returns:
        FriedmanResult: Chi-square statistic, p-value and average rank per model
    """
    scores = np.asarray(matrix, dtype=float)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise ValueError("friedman_test needs at least 2 models")
    if scores.shape[0] < 2:
        raise ValueError("friedman_test needs at least 2 folds")
    n, k = scores.shape
    ranks = np.vstack([rankdata(-row) for row in scores])
    mean_ranks = ranks.mean(axis=0)
    statistic = 12.0 * n / (k * (k + 1)) * float(np.sum((mean_ranks - (k + 1) / 2.0) ** 2))
    ties = sum(float(np.sum(t ** 3 - t)) for t in (np.unique(row, return_counts=True)[1] for row in scores))
    correction = 1.0 - ties / (n * k * (k * k - 1))
    if correction <= 0:
        return FriedmanResult(statistic=0.0, p_value=1.0, average_ranks=mean_ranks.tolist())
    statistic /= correction
    p = float(chi2.sf(statistic, k - 1))
    return FriedmanResult(statistic=statistic, p_value=min(1.0, p), average_ranks=mean_ranks.tolist())


def holm_correction(p_values: Sequence[float], alpha: float = 0.05) -> Tuple[List[bool], List[float]]:
    """
    Holm step-down decisions and adjusted p-values, in input order.
    """
    p = np.asarray(p_values, dtype=float)
    if p.size == 0:
        return [], []
    if ((p < 0) | (p > 1)).any():
        raise ValueError("p-values must lie in [0, 1]")
    reject, adjusted, _, _ = multipletests(p, alpha=alpha, method="holm")
    return [bool(r) for r in reject], [float(a) for a in adjusted]


def pairwise_wilcoxon(matrix: np.ndarray, models: Sequence[str]) -> pd.DataFrame:
    """
    Two-sided signed-rank test across folds for every model pair.
    A pair whose scores never differ gets p = 1.

    Returns:
        pd.DataFrame: model_a, model_b, statistic, p_value
    """
    scores = np.asarray(matrix, dtype=float)
    records = []
    for i, j in combinations(range(len(models)), 2):
        try:
            result = wilcoxon_signed_rank(list(zip(scores[:, i], scores[:, j])))
            statistic, p = result.statistic, result.p_value
        except UndefinedStatisticError:
            statistic, p = float("nan"), 1.0
        records.append({"model_a": models[i], "model_b": models[j], "statistic": statistic, "p_value": p})
    return pd.DataFrame.from_records(records, columns=["model_a", "model_b", "statistic", "p_value"])


def maximal_cliques(n: int, edges: Sequence[Tuple[int, int]]) -> List[List[int]]:
    """Bron-Kerbosch with pivoting over an undirected graph on 0..n-1."""
    adjacency: List[Set[int]] = [set() for _ in range(n)]
    for a, b in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    found: List[List[int]] = []

    def expand(r: Set[int], p: Set[int], x: Set[int]) -> None:
        if not p and not x:
            found.append(sorted(r))
            return
        pivot = max(p | x, key=lambda v: len(adjacency[v] & p))
        for v in sorted(p - adjacency[pivot]):
            expand(r | {v}, p & adjacency[v], x & adjacency[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(range(n)), set())
    return sorted(found)


def critical_difference_ranks(
    matrix: np.ndarray,
    models: Sequence[str],
    reject: Sequence[bool],
) -> RankDiagram:
    """
    Average ranks plus maximal cliques of models no test separated.

    Args:
        matrix: folds x models scores
        models: Model names, column order
        reject: Holm decisions for the pairs in itertools.combinations order
    """
    ranks = np.vstack([rankdata(-row) for row in np.asarray(matrix, dtype=float)]).mean(axis=0)
    pairs = list(combinations(range(len(models)), 2))
    if len(reject) != len(pairs):
        raise ValueError(f"expected {len(pairs)} pairwise decisions, got {len(reject)}")
    edges = [pair for pair, rejected in zip(pairs, reject) if not rejected]
    cliques = maximal_cliques(len(models), edges)
    cliques.sort(key=lambda c: (min(ranks[i] for i in c), c))
    return RankDiagram(
        models=list(models),
        average_ranks=[float(r) for r in ranks],
        cliques=[[models[i] for i in c] for c in cliques],
    )


def render_rank_diagram(diagram: RankDiagram, width: int = 60) -> str:
    """Text critical-difference diagram: models on a rank axis, one bar per clique."""
    k = len(diagram.models)
    span = max(k - 1, 1)

    def column(rank: float) -> int:
        return int(round((rank - 1) / span * (width - 1)))

    lines = ["1".ljust(width - len(str(k))) + str(k), "|" + "-" * (width - 2) + "|"]
    order = sorted(range(k), key=lambda i: (diagram.average_ranks[i], diagram.models[i]))
    for i in order:
        pos = column(diagram.average_ranks[i])
        lines.append(" " * pos + f"* {diagram.models[i]} ({diagram.average_ranks[i]:.2f})")
    for clique in diagram.cliques:
        cols = [column(diagram.average_ranks[diagram.models.index(m)]) for m in clique]
        lo, hi = min(cols), max(cols)
        lines.append(" " * lo + "=" * (hi - lo + 1) + "  " + ", ".join(clique))
    return "\n".join(lines) + "\n"


def rank_plot_data(diagram: RankDiagram) -> pd.DataFrame:
    """One row per (model, clique) membership."""
    records = []
    for i, model in enumerate(diagram.models):
        member = [c for c, clique in enumerate(diagram.cliques) if model in clique]
        for clique_id in member:
            records.append({"model": model, "average_rank": diagram.average_ranks[i], "clique": clique_id})
    return pd.DataFrame.from_records(records, columns=["model", "average_rank", "clique"])

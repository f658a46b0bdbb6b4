"""
Statistical test tests.
Run with: pytest tests/test_stats.py -v
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2, friedmanchisquare, norm

from app.core.errors import UndefinedStatisticError
from app.services.stats import (
    critical_difference_ranks,
    friedman_test,
    holm_correction,
    maximal_cliques,
    pairwise_wilcoxon,
    rank_plot_data,
    render_rank_diagram,
    wilcoxon_signed_rank,
)

pair_lists = st.lists(
    st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=1, max_size=30
).filter(lambda pairs: any(a != b for a, b in pairs))


@st.composite
def score_matrices(draw):
    n = draw(st.integers(2, 8))
    k = draw(st.integers(2, 5))
    cells = draw(st.lists(st.integers(-5, 5), min_size=n * k, max_size=n * k))
    return np.array(cells, dtype=float).reshape(n, k)


class TestWilcoxon:
    """Test the signed-rank test."""

    def test_hand_computed_example(self):
        """Differences 2, 3, -2 give W = 4.5 and a tie-corrected z."""
        result = wilcoxon_signed_rank([(3, 1), (5, 2), (4, 6)])
        z = (1.5 - 0.5) / math.sqrt(3.375)
        assert result.statistic == pytest.approx(4.5)
        assert result.n == 3
        assert result.z == pytest.approx(z)
        assert result.p_value == pytest.approx(2 * norm.sf(z))

    def test_one_sided(self):
        """The favoured direction gets a small p-value and the opposite one a large p-value."""
        pairs = [(10, 1), (9, 2), (8, 3), (7, 4), (12, 5), (11, 6)]
        greater = wilcoxon_signed_rank(pairs, alternative="greater")
        less = wilcoxon_signed_rank(pairs, alternative="less")
        assert greater.p_value < 0.05
        assert less.p_value > 0.95

    def test_zero_differences_dropped(self):
        """Equal pairs do not count towards n."""
        assert wilcoxon_signed_rank([(1, 1), (3, 1), (2, 5)]).n == 2

    def test_all_zero(self):
        """No nonzero difference leaves the statistic undefined."""
        with pytest.raises(UndefinedStatisticError):
            wilcoxon_signed_rank([(1, 1), (2, 2)])

    def test_rejects_nan(self):
        """NaN observations are rejected."""
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([(1.0, float("nan"))])

    def test_rejects_unknown_alternative(self):
        """Only the three alternatives exist."""
        with pytest.raises(ValueError):
            wilcoxon_signed_rank([(1, 2)], alternative="bigger")

    @settings(max_examples=100, deadline=None)
    @given(pairs=pair_lists)
    def test_rank_sums_complement(self, pairs):
        """W+ and W- add up to n(n+1)/2 and the two-sided p is symmetric."""
        forward = wilcoxon_signed_rank(pairs)
        backward = wilcoxon_signed_rank([(b, a) for a, b in pairs])
        n = forward.n
        assert forward.statistic + backward.statistic == pytest.approx(n * (n + 1) / 2)
        assert forward.p_value == pytest.approx(backward.p_value)
        assert 0.0 <= forward.p_value <= 1.0

    @settings(max_examples=100, deadline=None)
    @given(pairs=pair_lists, scale=st.integers(1, 50), shift=st.integers(-1000, 1000))
    def test_positive_affine_invariance(self, pairs, scale, shift):
        """Rescaling and shifting both members of every pair leaves W, z and p unchanged."""
        base = wilcoxon_signed_rank(pairs)
        moved = wilcoxon_signed_rank([(scale * a + shift, scale * b + shift) for a, b in pairs])
        assert moved.n == base.n
        assert moved.statistic == pytest.approx(base.statistic)
        assert moved.z == pytest.approx(base.z)
        assert moved.p_value == pytest.approx(base.p_value)


class TestFriedman:
    """Test the Friedman rank test."""

    def test_identical_models(self):
        """Identical columns give a zero statistic and p = 1."""
        result = friedman_test(np.tile([[0.5], [0.7], [0.9]], (1, 3)))
        assert result.statistic == pytest.approx(0.0)
        assert result.p_value == pytest.approx(1.0)
        assert result.average_ranks == [2.0, 2.0, 2.0]

    def test_consistent_ordering(self):
        """A fixed ordering over five folds gives chi2 = 10 on 2 degrees of freedom."""
        matrix = np.array([[0.9, 0.8, 0.7]] * 5)
        result = friedman_test(matrix)
        assert result.statistic == pytest.approx(10.0)
        assert result.p_value == pytest.approx(chi2.sf(10.0, 2))
        assert result.average_ranks == [1.0, 2.0, 3.0]

    @pytest.mark.parametrize("shape", [(5, 1), (1, 3)])
    def test_rejects_degenerate_shapes(self, shape):
        """Two models and two folds are the minimum."""
        with pytest.raises(ValueError):
            friedman_test(np.ones(shape))

    def test_tie_correction(self):
        """Two folds with a shared first place: 3 uncorrected, divided by 1 - 12/48."""
        result = friedman_test(np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]]))
        assert result.statistic == pytest.approx(4.0)
        assert result.average_ranks == [1.5, 1.5, 3.0]

    @settings(max_examples=100, deadline=None)
    @given(matrix=score_matrices())
    def test_matches_scipy_with_ties(self, matrix):
        """Tie-corrected statistic agrees with scipy on three or more models."""
        if matrix.shape[1] < 3 or all(len(set(row)) == 1 for row in matrix):
            return
        expected = friedmanchisquare(*matrix.T)
        assert friedman_test(matrix).statistic == pytest.approx(expected.statistic, abs=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(matrix=score_matrices(), data=st.data())
    def test_within_fold_monotone_invariance(self, matrix, data):
        """A strictly increasing transform per fold leaves the statistic and ranks unchanged."""
        n = matrix.shape[0]
        scales = np.array(data.draw(st.lists(st.integers(1, 9), min_size=n, max_size=n)), dtype=float)
        shifts = np.array(data.draw(st.lists(st.integers(-50, 50), min_size=n, max_size=n)), dtype=float)
        transformed = scales[:, None] * matrix ** 3 + shifts[:, None]
        base, moved = friedman_test(matrix), friedman_test(transformed)
        assert moved.statistic == pytest.approx(base.statistic)
        assert moved.p_value == pytest.approx(base.p_value)
        assert moved.average_ranks == pytest.approx(base.average_ranks)


class TestHolm:
    """Test Holm step-down correction."""

    def test_all_rejected(self):
        """p = .01, .02, .04 pass thresholds .05/3, .05/2 and .05."""
        reject, adjusted = holm_correction([0.01, 0.02, 0.04])
        assert reject == [True, True, True]
        assert adjusted == pytest.approx([0.03, 0.04, 0.04])

    def test_none_rejected(self):
        """Three p = .04 fail the first threshold, stopping the procedure."""
        reject, _ = holm_correction([0.04, 0.04, 0.04])
        assert reject == [False, False, False]

    def test_input_order_kept(self):
        """Decisions come back in input order."""
        reject, _ = holm_correction([0.5, 0.001])
        assert reject == [False, True]

    def test_empty(self):
        """No tests, no decisions."""
        assert holm_correction([]) == ([], [])

    @settings(max_examples=100, deadline=None)
    @given(p_values=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20))
    def test_between_bonferroni_and_uncorrected(self, p_values):
        """Holm rejects everything Bonferroni rejects and nothing the uncorrected test keeps."""
        alpha = 0.05
        reject, _ = holm_correction(p_values, alpha)
        m = len(p_values)
        for p, r in zip(p_values, reject):
            if p <= alpha / m:
                assert r
            if r:
                assert p <= alpha


class TestCliques:
    """Test critical-difference grouping."""

    def test_maximal_cliques(self):
        """Bron-Kerbosch finds every maximal clique."""
        assert maximal_cliques(3, [(0, 1)]) == [[0, 1], [2]]
        assert maximal_cliques(4, [(0, 1), (0, 2), (1, 2), (2, 3)]) == [[0, 1, 2], [2, 3]]
        assert maximal_cliques(3, []) == [[0], [1], [2]]

    def test_rank_diagram(self):
        """Only the unseparated pair shares a clique."""
        matrix = np.array([[0.9, 0.8, 0.1]] * 4)
        diagram = critical_difference_ranks(matrix, ["A", "B", "C"], reject=[False, True, True])
        assert diagram.average_ranks == [1.0, 2.0, 3.0]
        assert diagram.cliques == [["A", "B"], ["C"]]
        text = render_rank_diagram(diagram)
        assert "A (1.00)" in text and "C (3.00)" in text
        plot = rank_plot_data(diagram)
        assert plot["clique"].tolist() == [0, 0, 1]

    def test_rejects_wrong_decision_count(self):
        """One decision per model pair is required."""
        with pytest.raises(ValueError):
            critical_difference_ranks(np.ones((3, 3)), ["A", "B", "C"], reject=[True])

    def test_pairwise_identical_columns(self):
        """Models that never differ get p = 1."""
        matrix = np.array([[0.5, 0.5, 0.1], [0.6, 0.6, 0.2], [0.7, 0.7, 0.3]])
        df = pairwise_wilcoxon(matrix, ["A", "B", "C"])
        assert df[["model_a", "model_b"]].values.tolist() == [["A", "B"], ["A", "C"], ["B", "C"]]
        assert df["p_value"].iloc[0] == 1.0
        assert df["p_value"].iloc[1] < 1.0

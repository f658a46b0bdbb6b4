"""
Cross-validation protocol tests.
Run with: pytest tests/test_protocols.py -v
"""

import numpy as np
import pytest

from app.core.errors import InfeasibleProtocolError
from app.models.schemas import FoldReport, ProtocolName, Variant
from app.services.protocols import (
    FOLD_REPORTS,
    apply_budget,
    build_folds,
    predictions_frame,
    read_fold_reports,
    run_dir_for,
    run_protocol,
    write_fold_reports,
)
from app.services.simhome import generate_cohort


@pytest.fixture(scope="module")
def manifest():
    return generate_cohort(12, 5, seed=7).manifest


class TestBuildFolds:
    """Test fold definitions."""

    def test_all_hc(self, manifest):
        """One fold trains on every control and tests on every PD participant."""
        folds = build_folds(ProtocolName.ALL_HC, manifest)
        assert len(folds) == 1
        assert folds[0].fold_id == "all"
        assert len(folds[0].train_participants) == 12
        assert len(folds[0].test_participants) == 12
        assert all(p.startswith("PD") for p in folds[0].test_participants)
        assert folds[0].budget_windows is None

    def test_loo_hc(self, manifest):
        """One fold per control, each testing on all PD participants."""
        folds = build_folds(ProtocolName.LOO_HC, manifest)
        assert [f.fold_id for f in folds] == [f"HC{i:02d}" for i in range(1, 13)]
        assert all(len(f.test_participants) == 12 for f in folds)

    def test_loo_pd_excludes_training_participant(self, manifest):
        """Each PD fold tests on the other 11 PD participants."""
        folds = build_folds(ProtocolName.LOO_PD, manifest)
        assert len(folds) == 12
        for fold in folds:
            assert fold.train_participants == [fold.fold_id]
            assert len(fold.test_participants) == 11
            assert fold.fold_id not in fold.test_participants

    @pytest.mark.parametrize("protocol", [ProtocolName.FOUR_MIN_HC, ProtocolName.FOUR_MIN_PD])
    def test_budgeted_protocols(self, manifest, protocol):
        """Four-minute protocols carry the window budget."""
        folds = build_folds(protocol, manifest, budget=48)
        assert len(folds) == 12
        assert all(f.budget_windows == 48 for f in folds)

    def test_leave_one_out_needs_two_pairs(self):
        """A single pair cannot run a leave-one-out protocol."""
        single = generate_cohort(1, 1, seed=1).manifest
        assert len(build_folds(ProtocolName.ALL_HC, single)) == 1
        with pytest.raises(InfeasibleProtocolError, match="at least 2 pairs"):
            build_folds(ProtocolName.LOO_PD, single)


class TestBudget:
    """Test the four-minute training budget."""

    def test_keeps_earliest_windows(self, make_window_set):
        """The budget keeps the earliest windows by start time."""
        ws = make_window_set(n=60)
        shuffled = ws.subset(np.random.default_rng(0).permutation(60))
        kept = apply_budget(shuffled, 48)
        assert len(kept) == 48
        np.testing.assert_array_equal(np.sort(kept.start_ms), np.sort(ws.start_ms)[:48])

    def test_no_budget_or_small_set_unchanged(self, make_window_set):
        """Without a budget, or below it, the set is returned as is."""
        ws = make_window_set(n=10)
        assert apply_budget(ws, None) is ws
        assert apply_budget(ws, 48) is ws


class TestReports:
    """Test prediction and fold-report tables."""

    def test_predictions_frame_is_long(self, make_window_set):
        """One row per window step with truth and prediction."""
        ws = make_window_set(n=3)
        df = predictions_frame(ws, ws.labels)
        assert len(df) == 3 * 25
        assert list(df.columns) == ["participant", "start_ms", "step", "truth", "pred"]
        assert (df["truth"] == df["pred"]).all()
        assert df["step"].max() == 24

    def test_fold_reports_round_trip(self, tmp_path):
        """Fold reports survive the table, including undefined medication columns."""
        reports = [
            FoldReport(protocol=ProtocolName.LOO_HC, variant=Variant.RF, fold_id="HC01",
                       weighted_precision=0.8, weighted_f1=0.75, hallway_precision=0.5, hallway_f1=0.4),
            FoldReport(protocol=ProtocolName.LOO_HC, variant=Variant.RF, fold_id="HC02",
                       weighted_precision=0.7, weighted_f1=0.65, hallway_precision=0.3, hallway_f1=0.2,
                       med_f1=0.6, med_auroc=0.7),
        ]
        path = write_fold_reports(reports, tmp_path / FOLD_REPORTS)
        assert read_fold_reports(path) == reports

    def test_run_dir_layout(self, tmp_path):
        """Runs are grouped by protocol, then variant."""
        assert run_dir_for(tmp_path, ProtocolName.LOO_PD, Variant.MDCSA_RSSI) == tmp_path / "LOO-PD" / "mdcsa-rssi"


@pytest.mark.slow
class TestRunProtocol:
    """End-to-end protocol runs on a tiny simulated cohort."""

    @pytest.fixture
    def windows_dir(self, tmp_path, tiny_settings):
        from app.services.pipeline import preprocess_cohort
        from app.services.simhome import write_cohort

        data = tmp_path / "data"
        write_cohort(generate_cohort(2, 1, seed=5, config=tiny_settings), data)
        out = tmp_path / "windows"
        preprocess_cohort(data, out, tiny_settings)
        return out

    @pytest.mark.parametrize("variant", [Variant.MDCSA, Variant.RF])
    def test_loo_hc_writes_reports(self, tmp_path, tiny_settings, windows_dir, variant):
        """Each fold produces a report and a checkpoint; a rerun reuses them."""
        reports = run_protocol(ProtocolName.LOO_HC, variant, windows_dir, tmp_path / "train", tiny_settings)
        assert [r.fold_id for r in reports] == ["HC01", "HC02"]
        run_dir = run_dir_for(tmp_path / "train", ProtocolName.LOO_HC, variant)
        assert read_fold_reports(run_dir / FOLD_REPORTS) == reports
        for r in reports:
            assert 0.0 <= r.weighted_f1 <= 1.0
            assert (run_dir / f"fold_{r.fold_id}" / "predictions.csv.gz").is_file()

        again = run_protocol(ProtocolName.LOO_HC, variant, windows_dir, tmp_path / "train", tiny_settings)
        assert again == reports

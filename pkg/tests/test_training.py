"""
Training harness tests.
Run with: pytest tests/test_training.py -v
"""

import math

import pytest
import torch

from app.ml.crf import LinearChainCRF, crf_negative_log_likelihood
from app.models.records import WindowSet
from app.models.schemas import HyperParams, TrainConfig, Variant
from app.services.pipeline import apply_normalizer, fit_normalizer
from app.services.training import (
    combined_loss,
    grid_search,
    model_config_for,
    predict_rooms,
    prepare_windows,
    select_best,
    split_train_val,
    train_model,
)
from app.services.metrics import weighted_metrics

FAST = TrainConfig(kernels=[1, 2], dropout=0.0, batch_size=8, patience=200, seed=11)


def normalised(ws):
    return apply_normalizer(fit_normalizer(ws), ws)


class TestCombinedLoss:
    """Test the CRF plus hallway objective."""

    def test_uniform_logits(self):
        """Zero scores over two rooms cost log 2 for the CRF and log 2 for the hallway term."""
        loss = combined_loss(torch.zeros(3, 1, 2), torch.tensor([[0], [1], [1]]), torch.zeros(3, 1), LinearChainCRF(2))
        assert float(loss) == pytest.approx(2 * math.log(2.0), rel=1e-6)

    def test_perfect_hallway_logits(self):
        """Saturated correct hallway logits leave only the CRF term."""
        torch.manual_seed(0)
        tags = torch.tensor([[0, 1, 1, 3], [1, 2, 2, 2]])
        emissions = torch.randn(2, 4, 6)
        logits = (tags == 1).float() * 100.0 - 50.0
        crf = LinearChainCRF(6)
        expected = crf_negative_log_likelihood(emissions, tags, crf.transitions, crf.start).mean()
        assert float(combined_loss(emissions, tags, logits, crf)) == pytest.approx(float(expected), abs=1e-5)

    def test_matches_composed_oracle(self):
        """Equals mean over windows of NLL plus time-averaged binary cross-entropy."""
        torch.manual_seed(1)
        tags = torch.randint(0, 6, (3, 5))
        emissions, logits = torch.randn(3, 5, 6), torch.randn(3, 5)
        crf = LinearChainCRF(6)
        nll = crf_negative_log_likelihood(emissions, tags, crf.transitions, crf.start)
        p = torch.sigmoid(logits)
        y = (tags == 1).float()
        bce = -(y * torch.log(p) + (1 - y) * torch.log(1 - p)).mean(dim=1)
        assert float(combined_loss(emissions, tags, logits, crf)) == pytest.approx(float((nll + bce).mean()), rel=1e-5)


class TestPrepareWindows:
    """Test variant-specific inputs."""

    @pytest.mark.parametrize("variant,rssi,accel", [
        (Variant.MDCSA, 20, 6),
        (Variant.MDCSA_4APS, 8, 6),
        (Variant.MDCSA_RSSI, 20, 0),
        (Variant.MDCSA_4APS_RSSI, 8, 0),
    ])
    def test_channel_layout(self, make_window_set, variant, rssi, accel):
        """Each variant sees its own channels and sizes the network accordingly."""
        ws = prepare_windows(make_window_set(n=2), variant, top_aps=[1, 2, 3, 4])
        config = model_config_for(ws, 8, FAST)
        assert (config.rssi_channels, config.accel_channels) == (rssi, accel)


class TestSplitTrainVal:
    """Test the per-participant chronological validation split."""

    def test_last_windows_held_out(self, make_window_set):
        """The latest ceil(10%) of each participant's windows validate."""
        ws = WindowSet.concat([make_window_set(n=10, participant="HC01"), make_window_set(n=5, participant="HC02", seed=1)])
        train, val = split_train_val(ws, 0.1)
        assert len(train) == 13 and len(val) == 2
        assert sorted(zip(val.participants.tolist(), val.start_ms.tolist())) == [("HC01", 45000), ("HC02", 20000)]

    def test_rejects_single_window(self, make_window_set):
        """One window cannot be split."""
        with pytest.raises(ValueError):
            split_train_val(make_window_set(n=1), 0.1)


class TestTrainModel:
    """Test the optimisation loop."""

    def test_overfits_one_batch(self, make_window_set):
        """Eight separable windows are learned almost perfectly."""
        ws = normalised(make_window_set(n=8))
        result = train_model(ws, ws, HyperParams(d=16, epochs=200, lr=0.01), FAST)
        _, f1 = weighted_metrics(predict_rooms(result.model, ws), ws.labels)
        assert f1 >= 0.95
        assert result.best_val_f1 == pytest.approx(f1)

    def test_same_seed_same_trace(self, make_window_set):
        """Identical seeds give identical loss traces."""
        ws = normalised(make_window_set(n=12))
        hyper = HyperParams(d=8, epochs=3, lr=0.01)
        a = train_model(ws, ws, hyper, FAST, keys=("fold",))
        b = train_model(ws, ws, hyper, FAST, keys=("fold",))
        assert a.loss_trace == b.loss_trace
        assert len(a.loss_trace) == 3 * 2

    def test_early_stopping(self, make_window_set):
        """A frozen validation score stops training after the patience budget."""
        ws = normalised(make_window_set(n=4))
        cfg = FAST.model_copy(update={"patience": 2})
        result = train_model(ws, ws, HyperParams(d=8, epochs=50, lr=1e-12), cfg)
        assert result.epochs_run == 3
        assert result.best_epoch == 1
        assert not result.model.training

    def test_rssi_only(self, make_window_set):
        """Networks train without accelerometer input."""
        ws = normalised(make_window_set(n=4, accel=False))
        result = train_model(ws, ws, HyperParams(d=8, epochs=1, lr=0.01), FAST)
        assert result.model.config.accel_channels == 0
        assert predict_rooms(result.model, ws).shape == (4, 25)

    def test_rejects_empty_split(self, make_window_set):
        """Both splits must hold windows."""
        ws = normalised(make_window_set(n=4))
        with pytest.raises(ValueError):
            train_model(ws, ws.subset(slice(0, 0)), HyperParams(d=8, epochs=1, lr=0.01), FAST)


class TestGridSearch:
    """Test hyperparameter selection."""

    def test_select_best_prefers_first(self):
        """Ties resolve to the earliest grid point."""
        assert select_best([0.5, 0.7, 0.7]) == 1
        assert select_best([0.3]) == 0

    def test_singleton_grid(self, make_window_set):
        """A one-point grid returns that point."""
        ws = normalised(make_window_set(n=6))
        cfg = FAST.model_copy(update={"grid_d": [8], "grid_epochs": [1], "grid_lr": [0.01]})
        result = grid_search(cfg, [(ws, ws)])
        assert result.best == HyperParams(d=8, epochs=1, lr=0.01)
        assert len(result.results) == 1

    def test_dominant_point_wins(self, make_window_set):
        """A learning rate that learns beats one that cannot move the weights."""
        ws = normalised(make_window_set(n=8))
        cfg = FAST.model_copy(update={"grid_d": [16], "grid_epochs": [60], "grid_lr": [1e-12, 0.01]})
        result = grid_search(cfg, [(ws, ws)])
        assert result.best.lr == 0.01
        scores = [score for _, score in result.mean_scores]
        assert scores[1] > scores[0]

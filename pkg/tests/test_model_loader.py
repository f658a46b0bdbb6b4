"""
Checkpoint persistence tests.
Run with: pytest tests/test_model_loader.py -v
"""

import numpy as np
import pytest
import torch

from app.core.errors import CheckpointError, MissingArtifactError
from app.ml.forest import rf_fit
from app.ml.mdcsa import MdcsaNetwork
from app.ml.model_loader import (
    FOREST_CHECKPOINT,
    NETWORK_CHECKPOINT,
    checkpoint_path,
    clear_cache,
    load_checkpoint,
    save_checkpoint,
)
from app.models.schemas import MdcsaConfig, NormalizationStats, RandomForestParams, Variant


@pytest.fixture(autouse=True)
def fresh_cache():
    clear_cache()
    yield
    clear_cache()


@pytest.fixture
def normalizer():
    return NormalizationStats(channels=["rssi_ap1", "ax"], mean=[-80.0, 0.0], std=[4.0, 1.0])


@pytest.fixture
def network():
    torch.manual_seed(0)
    model = MdcsaNetwork(MdcsaConfig(d=8, kernels=[1, 2], dropout=0.0))
    model.eval()
    return model


class TestNetworkCheckpoint:
    """Test saving and loading the network."""

    def test_path_by_variant(self, tmp_path):
        """Networks and forests use different file names."""
        assert checkpoint_path(tmp_path, Variant.MDCSA).name == NETWORK_CHECKPOINT
        assert checkpoint_path(tmp_path, Variant.RF).name == FOREST_CHECKPOINT

    def test_round_trip_preserves_outputs(self, tmp_path, network, normalizer):
        """A reloaded network produces identical emissions and keeps its preprocessing state."""
        path = save_checkpoint(tmp_path, Variant.MDCSA, network, normalizer, [1, 3, 5, 7], {"d": 8, "lr": 0.01})
        loaded = load_checkpoint(path, use_cache=False)

        rssi, accel = torch.randn(3, 25, 20), torch.randn(3, 25, 6)
        with torch.no_grad():
            expected, _ = network(rssi, accel)
            actual, _ = loaded.model(rssi, accel)
        torch.testing.assert_close(actual, expected)
        assert loaded.variant == Variant.MDCSA
        assert loaded.top_aps == [1, 3, 5, 7]
        assert loaded.normalizer == normalizer
        assert loaded.hyperparams == {"d": 8, "lr": 0.01}
        assert loaded.config == network.config
        assert not loaded.model.training

    def test_cache_returns_same_object(self, tmp_path, network, normalizer):
        """Loading twice through the cache yields the same model until the cache is cleared."""
        path = save_checkpoint(tmp_path, Variant.MDCSA, network, normalizer, [1, 2, 3, 4], {})
        first = load_checkpoint(path)
        assert load_checkpoint(path) is first
        clear_cache()
        assert load_checkpoint(path) is not first

    def test_shape_mismatch_raises(self, tmp_path, network, normalizer):
        """A state dict that does not fit its recorded config is rejected."""
        path = save_checkpoint(tmp_path, Variant.MDCSA, network, normalizer, [1, 2, 3, 4], {})
        payload = torch.load(path, map_location="cpu", weights_only=True)
        payload["config"]["d"] = 16
        torch.save(payload, path)
        with pytest.raises(CheckpointError, match="does not match"):
            load_checkpoint(path, use_cache=False)

    def test_format_version_checked(self, tmp_path, network, normalizer):
        """Checkpoints from another format version are rejected."""
        path = save_checkpoint(tmp_path, Variant.MDCSA, network, normalizer, [1, 2, 3, 4], {})
        payload = torch.load(path, map_location="cpu", weights_only=True)
        payload["format_version"] = 99
        torch.save(payload, path)
        with pytest.raises(CheckpointError, match="format version"):
            load_checkpoint(path, use_cache=False)

    def test_missing_file(self, tmp_path):
        """A missing checkpoint points at `train`."""
        with pytest.raises(MissingArtifactError, match="train"):
            load_checkpoint(tmp_path / NETWORK_CHECKPOINT)


class TestForestCheckpoint:
    """Test saving and loading the forest baseline."""

    def test_round_trip_preserves_predictions(self, tmp_path, normalizer):
        """A reloaded forest predicts exactly as before."""
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 5))
        y = (X[:, 0] > 0).astype(int)
        forest = rf_fit(X, y, RandomForestParams(n_trees=5, min_leaf=1), seed=3)

        path = save_checkpoint(tmp_path, Variant.RF, forest, normalizer, [2, 4, 6, 8], {"n_trees": 5})
        loaded = load_checkpoint(path, use_cache=False)
        np.testing.assert_array_equal(loaded.model.predict(X), forest.predict(X))
        assert loaded.config is None
        assert loaded.top_aps == [2, 4, 6, 8]

"""
Model checkpoint persistence.
Saves and loads fold models together with the preprocessing state they were trained with.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import logging

import joblib
import torch

from app.core.errors import CheckpointError, MissingArtifactError
from app.ml.mdcsa import MdcsaNetwork
from app.models.schemas import FORMAT_VERSION, MdcsaConfig, NormalizationStats, Variant

logger = logging.getLogger(__name__)

NETWORK_CHECKPOINT = "model.pt"
FOREST_CHECKPOINT = "model.joblib"

_cache: Dict[str, "LoadedModel"] = {}


@dataclass
class LoadedModel:
    """A fold model plus everything needed to prepare its inputs."""
    variant: Variant
    model: Any
    normalizer: NormalizationStats
    top_aps: List[int]
    hyperparams: Dict[str, Any] = field(default_factory=dict)
    config: Optional[MdcsaConfig] = None


def checkpoint_path(fold_dir: Path, variant: Variant) -> Path:
    return Path(fold_dir) / (NETWORK_CHECKPOINT if variant.is_network else FOREST_CHECKPOINT)


def save_checkpoint(
    fold_dir: Path,
    variant: Variant,
    model: Any,
    normalizer: NormalizationStats,
    top_aps: List[int],
    hyperparams: Dict[str, Any],
) -> Path:
    """
    Write a versioned checkpoint into `fold_dir`.

    Args:
        fold_dir: Fold output directory
        variant: Model variant
        model: MdcsaNetwork or fitted forest
        normalizer: Training-split normalisation statistics
        top_aps: Access points kept for the variant
        hyperparams: Selected hyperparameters

    Returns:
        Path: The checkpoint file
    """
    path = checkpoint_path(fold_dir, variant)
    payload = {
        "format_version": FORMAT_VERSION,
        "variant": variant.value,
        "normalizer": normalizer.model_dump(),
        "top_aps": list(top_aps),
        "hyperparams": dict(hyperparams),
    }
    if variant.is_network:
        payload["config"] = model.config.model_dump()
        payload["state_dict"] = {k: v.detach().cpu() for k, v in model.state_dict().items()}
        torch.save(payload, path)
    else:
        payload["forest"] = model
        joblib.dump(payload, path)
    logger.info(f"Saved {variant.value} checkpoint to {path}")
    return path


def _validate_state(model: MdcsaNetwork, state: Dict[str, torch.Tensor], path: Path) -> None:
    expected = model.state_dict()
    missing = sorted(set(expected) - set(state))
    unexpected = sorted(set(state) - set(expected))
    mismatched = [
        f"{k}: {tuple(state[k].shape)} != {tuple(v.shape)}"
        for k, v in expected.items() if k in state and state[k].shape != v.shape
    ]
    if missing or unexpected or mismatched:
        raise CheckpointError(
            f"{path} does not match its config "
            f"(missing {missing}, unexpected {unexpected}, mismatched {mismatched})"
        )


def load_checkpoint(path: Union[str, Path], use_cache: bool = True) -> LoadedModel:
    """
    Load a checkpoint written by save_checkpoint, validating tensor shapes against its config.

    Args:
        path: Checkpoint file
        use_cache: Reuse an already loaded model for the same path

    Returns:
        LoadedModel: Model in eval mode with its preprocessing state
    """
    path = Path(path)
    key = str(path.resolve())
    if use_cache and key in _cache:
        return _cache[key]
    if not path.is_file():
        raise MissingArtifactError(f"Missing checkpoint {path}; run `train` first")

    if path.suffix == ".pt":
        payload = torch.load(path, map_location="cpu", weights_only=True)
    else:
        payload = joblib.load(path)
    if payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path} has format version {payload.get('format_version')}, expected {FORMAT_VERSION}")

    variant = Variant(payload["variant"])
    config = None
    if variant.is_network:
        config = MdcsaConfig(**payload["config"])
        model = MdcsaNetwork(config)
        _validate_state(model, payload["state_dict"], path)
        model.load_state_dict(payload["state_dict"])
        model.eval()
    else:
        model = payload["forest"]

    loaded = LoadedModel(
        variant=variant,
        model=model,
        normalizer=NormalizationStats(**payload["normalizer"]),
        top_aps=list(payload["top_aps"]),
        hyperparams=dict(payload["hyperparams"]),
        config=config,
    )
    if use_cache:
        _cache[key] = loaded
    logger.info(f"Loaded {variant.value} checkpoint from {path}")
    return loaded


def clear_cache() -> None:
    """Forget every cached model."""
    _cache.clear()
"""
Network training: combined CRF + hallway loss, RAdam with Look-Ahead,
early stopping on validation weighted F1, and grid search.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple
import copy
import logging
import math

import numpy as np
import torch
import torch.nn.functional as F

from app.core.errors import TrainingDivergedError
from app.core.seeding import Key, sub_seed, torch_generator
from app.ml.crf import LinearChainCRF
from app.ml.mdcsa import MdcsaNetwork
from app.ml.optim import build_optimizer
from app.models.records import N_APS, WindowSet
from app.models.schemas import (
    HALLWAY_INDEX,
    ROOMS,
    HyperParams,
    MdcsaConfig,
    NormalizationStats,
    TrainConfig,
    Variant,
)
from app.services.metrics import weighted_metrics
from app.services.pipeline import apply_normalizer, mask_channels

logger = logging.getLogger(__name__)


def prepare_windows(
    ws: WindowSet,
    variant: Variant,
    top_aps: Sequence[int],
    normalizer: Optional[NormalizationStats] = None,
) -> WindowSet:
    """Mask channels for the variant, then normalise when stats are given."""
    keep = top_aps if variant.uses_top_aps else range(1, N_APS + 1)
    masked = mask_channels(ws, keep, keep_accel=variant.uses_accel)
    return apply_normalizer(normalizer, masked) if normalizer is not None else masked


def model_config_for(ws: WindowSet, d: int, train_cfg: TrainConfig) -> MdcsaConfig:
    return MdcsaConfig(
        d=d,
        kernels=list(train_cfg.kernels),
        dropout=train_cfg.dropout,
        n_rooms=len(ROOMS),
        rssi_channels=ws.rssi.shape[-1],
        accel_channels=0 if ws.accel is None else ws.accel.shape[-1],
        window_len=ws.labels.shape[1],
    )


def to_tensors(ws: WindowSet, dtype: torch.dtype = torch.float32):
    rssi = torch.as_tensor(ws.rssi, dtype=dtype)
    accel = None if ws.accel is None else torch.as_tensor(ws.accel, dtype=dtype)
    tags = torch.as_tensor(ws.labels, dtype=torch.long)
    return rssi, accel, tags


def combined_loss(
    emissions: torch.Tensor,
    tags: torch.Tensor,
    hallway_logits: torch.Tensor,
    crf: LinearChainCRF,
    room: int = HALLWAY_INDEX,
) -> torch.Tensor:
    """
    Batch mean of CRF NLL plus the time-averaged hallway BCE of each window.

    Args:
        emissions: (B, T, m) room scores
        tags: (B, T) gold rooms
        hallway_logits: (B, T) reference-room logits
        crf: CRF head

    Returns:
        torch.Tensor: Scalar loss
    """
    nll = crf(emissions, tags)
    target = (tags == room).to(hallway_logits.dtype)
    bce = F.binary_cross_entropy_with_logits(hallway_logits, target, reduction="none").mean(dim=-1)
    return (nll + bce).mean()


def predict_rooms(model: MdcsaNetwork, ws: WindowSet, batch_size: int = 256) -> np.ndarray:
    """Viterbi room path for every window, (W, T)."""
    model.eval()
    dtype = next(model.parameters()).dtype
    rssi, accel, _ = to_tensors(ws, dtype)
    out = []
    for lo in range(0, len(ws), batch_size):
        hi = lo + batch_size
        out.append(model.decode(rssi[lo:hi], None if accel is None else accel[lo:hi]).numpy())
    if not out:
        return np.zeros((0, ws.labels.shape[1]), dtype=np.int64)
    return np.concatenate(out)


def split_train_val(ws: WindowSet, val_fraction: float) -> Tuple[WindowSet, WindowSet]:
    """Hold out the chronologically last `val_fraction` of each participant's windows."""
    if len(ws) < 2:
        raise ValueError("need at least two windows to carve out a validation split")
    train_idx, val_idx = [], []
    for participant in sorted(set(ws.participants.tolist())):
        rows = np.flatnonzero(ws.participants == participant)
        rows = rows[np.argsort(ws.start_ms[rows], kind="stable")]
        n_val = min(len(rows) - 1, math.ceil(val_fraction * len(rows))) if len(rows) > 1 else 0
        train_idx.extend(rows[: len(rows) - n_val].tolist())
        val_idx.extend(rows[len(rows) - n_val:].tolist())
    if not val_idx:
        train_idx, val_idx = train_idx[:-1], train_idx[-1:]
    return ws.subset(np.array(train_idx)), ws.subset(np.array(val_idx))


@dataclass
class TrainResult:
    """Best-on-validation model and its training history."""
    model: MdcsaNetwork
    hyperparams: HyperParams
    best_val_f1: float
    best_epoch: int
    epochs_run: int
    loss_trace: List[float] = field(default_factory=list)
    val_trace: List[float] = field(default_factory=list)


def train_model(
    train_ws: WindowSet,
    val_ws: WindowSet,
    hyper: HyperParams,
    train_cfg: TrainConfig,
    keys: Sequence[Key] = (),
) -> TrainResult:
    """
    Optimise the combined loss with RAdam + Look-Ahead; keep the best validation checkpoint.

    Stops after `patience` epochs without a strict improvement of validation weighted F1.

    Args:
        train_ws: Normalised training windows
        val_ws: Normalised validation windows
        hyper: Embedding size, epoch budget and learning rate
        train_cfg: Batch size, patience, Look-Ahead constants, seed
        keys: Extra sub-stream keys (fold id, grid point)

    Returns:
        TrainResult: Model in eval mode with its loss and validation traces

    Raises:
        TrainingDivergedError: The loss became non-finite
    """
    if len(train_ws) == 0 or len(val_ws) == 0:
        raise ValueError("training and validation splits must be non-empty")
    torch.manual_seed(sub_seed(train_cfg.seed, "init", *keys))
    model = MdcsaNetwork(model_config_for(train_ws, hyper.d, train_cfg))
    optimizer = build_optimizer(model.parameters(), hyper.lr, train_cfg.lookahead_k, train_cfg.lookahead_alpha)
    generator = torch_generator(train_cfg.seed, "batching", *keys)
    rssi, accel, tags = to_tensors(train_ws)

    best_f1, best_epoch, best_state, stale = -1.0, 0, None, 0
    loss_trace: List[float] = []
    val_trace: List[float] = []
    last_finite, step, epoch = float("nan"), 0, 0
    for epoch in range(1, hyper.epochs + 1):
        model.train()
        order = torch.randperm(len(train_ws), generator=generator)
        for lo in range(0, len(order), train_cfg.batch_size):
            idx = order[lo:lo + train_cfg.batch_size]
            emissions, logits = model(rssi[idx], None if accel is None else accel[idx])
            loss = combined_loss(emissions, tags[idx], logits, model.crf)
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch, step, last_finite)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            last_finite = float(loss.item())
            loss_trace.append(last_finite)
            step += 1

        _, f1 = weighted_metrics(predict_rooms(model, val_ws), val_ws.labels)
        val_trace.append(f1)
        if f1 > best_f1:
            best_f1, best_epoch, stale = f1, epoch, 0
            best_state = copy.deepcopy(model.state_dict())
        else:
            stale += 1
            if stale >= train_cfg.patience:
                logger.info(f"Early stop at epoch {epoch} (best {best_f1:.4f} at epoch {best_epoch})")
                break

    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(
        model=model,
        hyperparams=hyper,
        best_val_f1=best_f1,
        best_epoch=best_epoch,
        epochs_run=epoch,
        loss_trace=loss_trace,
        val_trace=val_trace,
    )


def select_best(mean_scores: Sequence[float]) -> int:
    """Index of the highest score; the earliest grid point wins ties."""
    best = 0
    for i, score in enumerate(mean_scores):
        if score > mean_scores[best]:
            best = i
    return best


@dataclass
class GridResult:
    best: HyperParams
    mean_scores: List[Tuple[HyperParams, float]]
    results: List[TrainResult]


def grid_search(
    train_cfg: TrainConfig,
    folds: Sequence[Tuple[WindowSet, WindowSet]],
    keys: Sequence[Key] = (),
) -> GridResult:
    """
    Train every grid point on every (train, val) split and keep the point with
    the best mean validation weighted F1.

    Returns:
        GridResult: Winner, every point's mean score and the winner's trained models
    """
    points = list(train_cfg.grid())
    if not points:
        raise ValueError("empty hyperparameter grid")
    scores, trained = [], []
    for i, hyper in enumerate(points):
        runs = [
            train_model(tr, va, hyper, train_cfg, keys=(*keys, f"split{j}", f"grid{i}"))
            for j, (tr, va) in enumerate(folds)
        ]
        mean_f1 = float(np.mean([r.best_val_f1 for r in runs]))
        logger.info(f"Grid point {hyper.model_dump()} mean validation F1 {mean_f1:.4f}")
        scores.append(mean_f1)
        trained.append(runs)
    best = select_best(scores)
    return GridResult(
        best=points[best],
        mean_scores=list(zip(points, scores)),
        results=trained[best],
    )

"""Training and fine-tuning loops.

Frame outputs regress to the segment's distance label with MSE; evaluation
reduces frames to one distance per segment (their mean) and reports MAE.
Batches are bucketed by frame count so differently cropped segments never
need padding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .model import ArchConfig, FaNet


@dataclass
class TrainConfig:
    batch_size: int = 84
    lr: float = 1e-3
    epochs: int = 200
    plateau_patience: int = 10
    plateau_factor: float = 0.8
    plateau_eps: float = 1e-5
    seed: int = 0
    recrop_per_epoch: bool = True  # fresh random crops of the rendered audio
    keep_best: bool = True  # return the best-validation-MAE checkpoint

    def __post_init__(self):
        for name in ("batch_size", "lr", "epochs", "plateau_patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(**data)


class DivergenceError(RuntimeError):
    pass


def _bucketed_batches(samples, batch_size, rng, recrop=False):
    buckets = {}
    for idx, sample in enumerate(samples):
        buckets.setdefault(sample.frame_count, []).append(idx)
    order = []
    for frame_count in sorted(buckets):
        ids = buckets[frame_count]
        rng.shuffle(ids)
        order.extend(
            ids[i : i + batch_size] for i in range(0, len(ids), batch_size)
        )
    rng.shuffle(order)
    for batch_ids in order:
        if recrop:
            x = torch.stack([samples[i].recrop(rng) for i in batch_ids])
        else:
            x = torch.stack([samples[i].features for i in batch_ids])
        y = torch.tensor([samples[i].distance_m for i in batch_ids], dtype=torch.float32)
        yield x, y


def _epoch_loss(model, samples, batch_size, rng, optimizer=None, recrop=False):
    criterion = nn.MSELoss()
    total, count = 0.0, 0
    for x, y in _bucketed_batches(samples, batch_size, rng, recrop=recrop):
        frames = model(x)
        loss = criterion(frames, y[:, None].expand_as(frames))
        if optimizer is not None:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        total += float(loss.detach()) * len(x)
        count += len(x)
    return total / max(count, 1)


def evaluate_mae(model: FaNet, samples) -> float:
    """Mean absolute error of the per-segment (frame-averaged) distance."""
    model.eval()
    errors = []
    with torch.no_grad():
        for sample in samples:
            frames = model(sample.features.unsqueeze(0))[0]
            errors.append(abs(float(frames.mean()) - sample.distance_m))
    return float(np.mean(errors))


def train(
    dataset,
    config: TrainConfig | None = None,
    arch: ArchConfig | None = None,
) -> tuple[FaNet, list]:
    """Train from scratch; returns the model and per-epoch metrics rows."""
    config = config or TrainConfig()
    if not dataset.train:
        raise ValueError("training split is empty")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    model = FaNet(arch or ArchConfig())
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer,
        mode="min",
        factor=config.plateau_factor,
        patience=config.plateau_patience,
        threshold=config.plateau_eps,
        threshold_mode="abs",
    )

    metrics = []
    best_mae = math.inf
    best_state = None
    for epoch in range(config.epochs):
        model.train()
        train_loss = _epoch_loss(
            model, dataset.train, config.batch_size, rng, optimizer,
            recrop=config.recrop_per_epoch,
        )
        if math.isnan(train_loss) or math.isinf(train_loss):
            raise DivergenceError(
                f"training loss {train_loss} at epoch {epoch}; "
                f"lr={optimizer.param_groups[0]['lr']}, "
                f"n_train={len(dataset.train)}"
            )
        monitor = dataset.val or dataset.train
        model.eval()
        with torch.no_grad():
            val_loss = _epoch_loss(model, monitor, config.batch_size, rng)
        val_mae = evaluate_mae(model, monitor)
        scheduler.step(val_loss)
        if config.keep_best and val_mae < best_mae:
            best_mae = val_mae
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        metrics.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "val_loss": val_loss,
                "val_mae": val_mae,
                "lr": optimizer.param_groups[0]["lr"],
            }
        )
    if best_state is not None:
        model.load_state_dict(best_state)
        model.eval()
    return model, metrics


def finetune(model: FaNet, samples, epochs: int = 100, lr: float = 1e-3, seed: int = 0) -> FaNet:
    """Adapt an existing model to a target room from a few labeled segments.

    ``epochs=0`` is a strict no-op: the model is returned untouched, so an
    export after it is byte-identical to an export before.
    """
    if not samples:
        raise ValueError("finetune needs at least one labeled sample")
    if epochs == 0:
        return model
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    model.train()
    for epoch in range(epochs):
        loss = _epoch_loss(model, samples, len(samples), rng, optimizer)
        if math.isnan(loss) or math.isinf(loss):
            raise DivergenceError(f"fine-tuning loss {loss} at epoch {epoch}")
    model.eval()
    return model


def write_metrics_csv(metrics, path) -> None:
    lines = ["epoch,train_loss,val_loss,val_mae,lr"]
    for row in metrics:
        lines.append(
            f"{row['epoch']},{row['train_loss']!r},{row['val_loss']!r},"
            f"{row['val_mae']!r},{row['lr']!r}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")

"""The training loop: seeded batching, train-only augmentation, early
stopping on validation loss, best-checkpoint saving.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torchvision.transforms.functional as TF

from .config import CheckpointMeta, TrainConfig
from .exceptions import DivergedLoss, EmptySplit, ShapeMismatch
from .files import read_manifest_labels, read_quality_labels, read_split, read_tensor, tensor_path
from .models import build_model

log = logging.getLogger("fundustrain")

EYES = ("L", "R")


@dataclass
class ImageSet:
    """In-memory view of one subset: ids aligned with rows of x and y."""

    ids: list[tuple[str, str]]          # (participant_id, eye)
    x: torch.Tensor                     # (N, 3, H, W) float32
    y: torch.Tensor                     # (N,) float32

    def __len__(self) -> int:
        return len(self.ids)


class EarlyStopper:
    """Stop when the validation loss has not improved for ``patience`` epochs.

    Improvement means strictly lower loss; with patience p, training
    halts exactly p epochs after the best one.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_loss = float("inf")
        self.best_epoch = -1
        self.epochs_since_best = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch; returns True if this epoch is a new best."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.epochs_since_best = 0
            return True
        self.epochs_since_best += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.epochs_since_best >= self.patience


def build_items(
    task: str,
    manifest_labels: dict[str, dict[str, float]],
    split: dict[str, str],
    subset: str,
    quality_labels: dict[tuple[str, str], float] | None = None,
) -> list[tuple[str, str, float]]:
    """(participant, eye, target) triples for one subset.

    Images whose target is missing are discarded for this task only.
    The quality task takes per-image gate labels instead of manifest
    columns.
    """
    items: list[tuple[str, str, float]] = []
    if task == "quality":
        if quality_labels is None:
            raise ValueError("quality task needs per-image quality labels")
        for (pid, eye), value in sorted(quality_labels.items()):
            if split.get(pid) == subset:
                items.append((pid, eye, value))
        return items
    for pid in sorted(manifest_labels):
        if split.get(pid) != subset:
            continue
        value = manifest_labels[pid].get(task)
        if value is None:
            continue
        for eye in EYES:
            items.append((pid, eye, value))
    return items


def load_image_set(tensor_dir: str | Path, items) -> ImageSet:
    """Load FPT1 tensors for (participant, eye, target) triples."""
    ids, planes, targets = [], [], []
    for pid, eye, target in items:
        arr = read_tensor(tensor_path(tensor_dir, pid, eye))
        planes.append(torch.from_numpy(arr.transpose(2, 0, 1)))
        ids.append((pid, eye))
        targets.append(float(target))
    if not ids:
        raise EmptySplit("no usable examples")
    return ImageSet(ids=ids, x=torch.stack(planes), y=torch.tensor(targets))


def undersample_items(items, n_majority: int | None, seed: int):
    """Keep all minority examples and a seeded sample of the majority.

    Targets must be binary. ``n_majority=None`` matches the minority
    count. Sampling is without replacement and input order is kept.
    """
    pos = [i for i, (_, _, y) in enumerate(items) if y >= 0.5]
    neg = [i for i, (_, _, y) in enumerate(items) if y < 0.5]
    majority, minority = (pos, neg) if len(pos) > len(neg) else (neg, pos)
    count = len(minority) if n_majority is None else n_majority
    if count > len(majority):
        raise EmptySplit(f"requested {count} majority examples, have {len(majority)}")
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(np.array(majority), size=count, replace=False).tolist())
    keep = chosen.union(minority)
    return [item for i, item in enumerate(items) if i in keep]


def class_weight_pair(targets: torch.Tensor) -> tuple[float, float]:
    """(w_neg, w_pos) inversely proportional to class frequency."""
    n = targets.numel()
    n_pos = int((targets >= 0.5).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EmptySplit("weighted loss needs both classes in the training set")
    return n / (2.0 * n_neg), n / (2.0 * n_pos)


def batch_loss(pred: torch.Tensor, target: torch.Tensor, loss_name: str,
               weights: tuple[float, float] | None = None) -> torch.Tensor:
    if loss_name == "mae":
        return (pred - target).abs().mean()
    eps = 1e-7
    p = pred.clamp(eps, 1.0 - eps)
    elementwise = -(target * p.log() + (1.0 - target) * (1.0 - p).log())
    if loss_name == "bce":
        return elementwise.mean()
    if loss_name == "weighted_bce":
        w_neg, w_pos = weights if weights is not None else (1.0, 1.0)
        w = torch.where(target >= 0.5,
                        torch.as_tensor(w_pos, dtype=pred.dtype),
                        torch.as_tensor(w_neg, dtype=pred.dtype))
        return (w * elementwise).mean()
    raise ValueError(f"unknown loss {loss_name!r}")


def _augment_batch(x: torch.Tensor, cfg: TrainConfig, gen: torch.Generator) -> torch.Tensor:
    """Per-sample rotation then flips; background fills with -1 (black)."""
    out = x.clone()
    n = x.shape[0]
    angles = (torch.rand(n, generator=gen) * 2.0 - 1.0) * cfg.rotation_degrees
    flip_h = torch.rand(n, generator=gen) < 0.5 if cfg.flip_horizontal else torch.zeros(n, dtype=torch.bool)
    flip_v = torch.rand(n, generator=gen) < 0.5 if cfg.flip_vertical else torch.zeros(n, dtype=torch.bool)
    for i in range(n):
        sample = out[i]
        if cfg.rotation_degrees > 0 and float(angles[i]) != 0.0:
            sample = TF.rotate(sample.unsqueeze(0), float(angles[i]),
                               interpolation=TF.InterpolationMode.BILINEAR,
                               fill=[-1.0]).squeeze(0)
        if bool(flip_h[i]):
            sample = torch.flip(sample, dims=[2])
        if bool(flip_v[i]):
            sample = torch.flip(sample, dims=[1])
        out[i] = sample
    return out


def _evaluate_loss(model, x, y, loss_name, weights, batch_size) -> float:
    model.eval()
    total = 0.0
    with torch.no_grad():
        for start in range(0, len(y), batch_size):
            xb = x[start:start + batch_size]
            yb = y[start:start + batch_size]
            total += float(batch_loss(model(xb), yb, loss_name, weights)) * len(yb)
    return total / len(y)


def train(cfg: TrainConfig, train_set: ImageSet, val_set: ImageSet,
          out_dir: str | Path) -> tuple[CheckpointMeta, list[dict]]:
    """Train one model; save the lowest-validation-loss checkpoint.

    Returns the checkpoint metadata and the per-epoch history
    (epoch, train_loss, val_loss). In the ``last_layers_only`` regime
    only head parameters receive updates; augmentation touches the
    training set only; all sampling is seeded.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise EmptySplit("train and validation sets must be nonempty")
    torch.manual_seed(cfg.seed)

    model = build_model(cfg.head_variant, cfg.backbone, cfg.classification,
                        cfg.keep_rate, cfg.pretrained_weights)
    if cfg.regime == "last_layers_only":
        model.freeze_backbone()

    loss_name = cfg.resolved_loss()
    weights = class_weight_pair(train_set.y) if loss_name == "weighted_bce" else None

    # Regression targets are standardized with training-set statistics;
    # the checkpoint carries them so predictions come back in task units.
    target_mean, target_std = 0.0, 1.0
    if not cfg.classification and cfg.standardize_targets:
        target_mean = float(train_set.y.mean())
        std = float(train_set.y.std(unbiased=False))
        target_std = std if std > 0 else 1.0
    y_train = (train_set.y - target_mean) / target_std
    y_val = (val_set.y - target_mean) / target_std

    optimizer = torch.optim.Adam(
        (p for p in model.parameters() if p.requires_grad),
        lr=cfg.lr, betas=(cfg.beta1, cfg.beta2),
    )
    stopper = EarlyStopper(cfg.patience)
    best_state: dict | None = None
    history: list[dict] = []

    for epoch in range(cfg.max_epochs):
        gen = torch.Generator().manual_seed(cfg.seed * 1_000_003 + epoch)
        order = torch.randperm(len(train_set), generator=gen)
        model.train()
        running, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = train_set.x[idx]
            if cfg.augment:
                xb = _augment_batch(xb, cfg, gen)
            yb = y_train[idx]
            optimizer.zero_grad()
            loss = batch_loss(model(xb), yb, loss_name, weights)
            if not torch.isfinite(loss):
                raise DivergedLoss(f"non-finite training loss at epoch {epoch}")
            loss.backward()
            optimizer.step()
            running += float(loss.detach()) * len(idx)
            seen += len(idx)

        val_loss = _evaluate_loss(model, val_set.x, y_val, loss_name, weights,
                                  cfg.batch_size)
        if not np.isfinite(val_loss):
            raise DivergedLoss(f"non-finite validation loss at epoch {epoch}")
        history.append({"epoch": epoch, "train_loss": running / seen,
                        "val_loss": val_loss})
        if stopper.update(epoch, val_loss):
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        log.debug("epoch %d train %.5f val %.5f", epoch, running / seen, val_loss)
        if stopper.should_stop:
            break

    meta = CheckpointMeta(
        model_id=cfg.resolved_model_id(),
        task=cfg.task,
        regime=cfg.regime,
        best_val_loss=stopper.best_loss,
        epoch=stopper.best_epoch,
        config_hash=cfg.config_hash(),
    )
    save_checkpoint(out_dir, cfg, meta, best_state,
                    input_hw=tuple(train_set.x.shape[2:]),
                    target_mean=target_mean, target_std=target_std)
    return meta, history


def save_checkpoint(out_dir, cfg: TrainConfig, meta: CheckpointMeta, state,
                    input_hw, target_mean: float, target_std: float) -> None:
    from .files import write_meta

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save({
        "model_state": state,
        "task": cfg.task,
        "backbone": cfg.backbone,
        "head_variant": cfg.head_variant,
        "classification": cfg.classification,
        "keep_rate": cfg.keep_rate,
        "model_id": meta.model_id,
        "input_hw": tuple(int(v) for v in input_hw),
        "target_mean": target_mean,
        "target_std": target_std,
    }, out / "checkpoint.pt")
    write_meta(out / "checkpoint.meta", meta.as_dict())


def train_from_files(
    cfg: TrainConfig,
    tensor_dir: str | Path,
    manifest_path: str | Path,
    split_path: str | Path,
    out_dir: str | Path,
    quality_labels_path: str | Path | None = None,
) -> tuple[CheckpointMeta, list[dict]]:
    """File-boundary wrapper: manifest + split + tensors in, checkpoint out."""
    manifest_labels = read_manifest_labels(manifest_path)
    split = read_split(split_path)
    quality_labels = (read_quality_labels(quality_labels_path)
                      if quality_labels_path is not None else None)
    train_items = build_items(cfg.task, manifest_labels, split, "train", quality_labels)
    val_items = build_items(cfg.task, manifest_labels, split, "val", quality_labels)
    if cfg.imbalance == "undersample":
        train_items = undersample_items(train_items, cfg.undersample_n, cfg.seed)
    train_set = load_image_set(tensor_dir, train_items)
    val_set = load_image_set(tensor_dir, val_items)
    if train_set.x.shape[2:] != val_set.x.shape[2:]:
        raise ShapeMismatch("train and validation tensors differ in size")
    return train(cfg, train_set, val_set, out_dir)

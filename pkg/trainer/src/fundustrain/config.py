"""Training configuration and checkpoint metadata."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

from .files import CLASSIFICATION_TASKS, TASKS

REGIMES = ("last_layers_only", "full_finetune")
LOSSES = ("mae", "bce", "weighted_bce")
IMBALANCE_MODES = ("none", "weighted", "undersample")


@dataclass(frozen=True)
class TrainConfig:
    """One training run.

    Defaults follow the study's regime: adaptive-moment optimizer at
    lr 0.001 with betas 0.9/0.999, batch size 32, early stopping after
    50 epochs without validation improvement, dropout keep rate 0.5.
    ``loss="auto"`` picks MAE for regression and BCE for classification
    (weighted BCE when ``imbalance="weighted"``).
    """

    task: str
    backbone: str = "tiny-test"
    regime: str = "full_finetune"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 32
    patience: int = 50
    max_epochs: int = 200
    loss: str = "auto"
    imbalance: str = "none"
    undersample_n: int | None = None
    keep_rate: float = 0.5
    augment: bool = True
    rotation_degrees: float = 15.0
    flip_horizontal: bool = True
    flip_vertical: bool = True
    standardize_targets: bool = True
    pretrained_weights: str | None = None
    seed: int = 0
    model_id: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        if self.loss not in LOSSES + ("auto",):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.imbalance not in IMBALANCE_MODES:
            raise ValueError(f"unknown imbalance mode {self.imbalance!r}")
        if not 0.0 < self.keep_rate <= 1.0:
            raise ValueError("keep_rate must lie in (0, 1]")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience, max_epochs must be >= 1")

    @property
    def classification(self) -> bool:
        return self.task in CLASSIFICATION_TASKS

    @property
    def head_variant(self) -> str:
        return "quality" if self.task == "quality" else "risk"

    def resolved_loss(self) -> str:
        if self.loss != "auto":
            return self.loss
        if not self.classification:
            return "mae"
        return "weighted_bce" if self.imbalance == "weighted" else "bce"

    def resolved_model_id(self) -> str:
        if self.model_id:
            return self.model_id
        return f"{self.task}-{self.backbone}-{self.regime}-s{self.seed}"

    def config_hash(self) -> str:
        payload = repr(sorted(dataclasses.asdict(self).items()))
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


@dataclass(frozen=True)
class CheckpointMeta:
    """Sidecar facts about a saved model."""

    model_id: str
    task: str
    regime: str
    best_val_loss: float
    epoch: int
    config_hash: str

    def as_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "task": self.task,
            "regime": self.regime,
            "best_val_loss": repr(self.best_val_loss),
            "epoch": self.epoch,
            "config_hash": self.config_hash,
        }

"""Backbones and task heads.

Two backbones: ``tiny-test``, a few convolution/pool stages that train
in seconds on synthetic data (the offline test path), and ``inception``,
the torchvision inception-v3 feature extractor used with pretrained
weights in production. Both expose a feature map that the model pools
globally before the head.

Heads:

- quality: dense 1024 -> dense 512 -> 1 with sigmoid;
- risk: dense 512 -> 1, linear for regression and sigmoid for
  classification;

with dropout (keep rate 0.5 by default) after every pre-output dense
layer, active only in training mode.
"""

from __future__ import annotations

import torch
from torch import nn

from .exceptions import ShapeMismatch, WeightsUnavailable

BACKBONES = ("tiny-test", "inception")
HEAD_VARIANTS = ("quality", "risk")


class TinyBackbone(nn.Module):
    """Three conv/pool stages; deliberately BatchNorm-free so freezing it
    really freezes every trainable statistic."""

    feature_dim = 32

    def __init__(self):
        super().__init__()
        self.stages = nn.Sequential(
            nn.Conv2d(3, 8, kernel_size=3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(8, 16, kernel_size=3, stride=2, padding=1), nn.ReLU(),
            nn.Conv2d(16, 32, kernel_size=3, stride=2, padding=1), nn.ReLU(),
        )

    def forward(self, x):
        return self.stages(x)


class InceptionBackbone(nn.Module):
    """Inception-v3 convolutional trunk (classifier head removed)."""

    feature_dim = 2048

    def __init__(self, weights_path: str | None = None):
        super().__init__()
        from torchvision.models import inception_v3

        net = inception_v3(weights=None, aux_logits=True, init_weights=True)
        if weights_path is not None:
            try:
                state = torch.load(weights_path, map_location="cpu", weights_only=True)
            except OSError as err:
                raise WeightsUnavailable(f"cannot read weights at {weights_path}: {err}") from None
            net.load_state_dict(state, strict=False)
        net.aux_logits = False
        net.AuxLogits = None
        net.fc = nn.Identity()
        net.avgpool = nn.Identity()
        net.dropout = nn.Identity()
        self.net = net

    def forward(self, x):
        # Run the inception trunk manually so we keep the feature map.
        n = self.net
        x = n.Conv2d_1a_3x3(x)
        x = n.Conv2d_2a_3x3(x)
        x = n.Conv2d_2b_3x3(x)
        x = n.maxpool1(x)
        x = n.Conv2d_3b_1x1(x)
        x = n.Conv2d_4a_3x3(x)
        x = n.maxpool2(x)
        x = n.Mixed_5b(x)
        x = n.Mixed_5c(x)
        x = n.Mixed_5d(x)
        x = n.Mixed_6a(x)
        x = n.Mixed_6b(x)
        x = n.Mixed_6c(x)
        x = n.Mixed_6d(x)
        x = n.Mixed_6e(x)
        x = n.Mixed_7a(x)
        x = n.Mixed_7b(x)
        x = n.Mixed_7c(x)
        return x


def build_backbone(name: str, weights_path: str | None = None) -> nn.Module:
    if name == "tiny-test":
        return TinyBackbone()
    if name == "inception":
        return InceptionBackbone(weights_path)
    raise ValueError(f"unknown backbone {name!r}; expected one of {BACKBONES}")


class QualityHead(nn.Module):
    """dense 1024 -> dense 512 -> 1 sigmoid, dropout after each dense."""

    def __init__(self, feature_dim: int, keep_rate: float = 0.5):
        super().__init__()
        drop = 1.0 - keep_rate
        self.layers = nn.Sequential(
            nn.Linear(feature_dim, 1024), nn.ReLU(), nn.Dropout(drop),
            nn.Linear(1024, 512), nn.ReLU(), nn.Dropout(drop),
            nn.Linear(512, 1),
        )

    def forward(self, features):
        return torch.sigmoid(self.layers(features))


class RiskHead(nn.Module):
    """dense 512 -> 1; sigmoid only for classification tasks."""

    def __init__(self, feature_dim: int, classification: bool, keep_rate: float = 0.5):
        super().__init__()
        self.classification = classification
        self.layers = nn.Sequential(
            nn.Linear(feature_dim, 512), nn.ReLU(), nn.Dropout(1.0 - keep_rate),
            nn.Linear(512, 1),
        )

    def forward(self, features):
        out = self.layers(features)
        return torch.sigmoid(out) if self.classification else out


class FundusModel(nn.Module):
    """Backbone -> global average pool -> head; single output unit."""

    def __init__(self, backbone: nn.Module, head: nn.Module):
        super().__init__()
        self.backbone = backbone
        self.head = head

    def forward(self, x):
        if x.ndim != 4 or x.shape[1] != 3:
            raise ShapeMismatch(f"expected (N, 3, H, W) input, got {tuple(x.shape)}")
        features = self.backbone(x)
        pooled = features.mean(dim=(2, 3))
        return self.head(pooled).squeeze(1)

    def freeze_backbone(self):
        for param in self.backbone.parameters():
            param.requires_grad_(False)


def build_model(head_variant: str, backbone_name: str, classification: bool,
                keep_rate: float = 0.5, weights_path: str | None = None) -> FundusModel:
    backbone = build_backbone(backbone_name, weights_path)
    if head_variant == "quality":
        head = QualityHead(backbone.feature_dim, keep_rate)
    elif head_variant == "risk":
        head = RiskHead(backbone.feature_dim, classification, keep_rate)
    else:
        raise ValueError(f"unknown head variant {head_variant!r}")
    return FundusModel(backbone, head)

"""fundustrain: file-interfaced training harness for fundus-image models.

Consumes the preprocessing toolkit's outputs (FPT1 tensors, manifest,
split and quality-label CSVs) and emits predictions in the shared file
format, so it can be swapped for any other score producer.
"""

from .config import CheckpointMeta, TrainConfig
from .models import FundusModel, build_model
from .predict import predict, predict_from_files
from .train import (
    EarlyStopper,
    ImageSet,
    batch_loss,
    build_items,
    class_weight_pair,
    load_image_set,
    train,
    train_from_files,
    undersample_items,
)

__version__ = "0.1.0"

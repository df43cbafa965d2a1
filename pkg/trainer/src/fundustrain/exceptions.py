"""Trainer error types."""


class TrainerError(Exception):
    """Base class for harness errors."""


class FileFormatError(TrainerError):
    """A consumed file does not match its documented format."""


class EmptySplit(TrainerError):
    """No usable examples in the requested subset."""


class DivergedLoss(TrainerError):
    """Training or validation loss became non-finite."""


class ShapeMismatch(TrainerError):
    """Checkpoint and input tensors disagree on shape or task."""


class WeightsUnavailable(TrainerError):
    """Pretrained backbone weights were requested but cannot be loaded."""

"""Left/right prediction fusion and the shared predictions file format.

A prediction is one model output for a (participant, eye, task) triple.
Fusion averages the left- and right-eye values into a single FUSED
record per participant; participants with only one eye predicted are
skipped and counted.

Predictions file header: ``participant_id,eye,task,value,model_id,split``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .exceptions import DuplicatePrediction, MismatchedPair, SchemaError

TASKS = ("age", "sex", "smoking", "bmi", "sbp", "dbp", "hba1c", "cholesterol", "quality")
CLASSIFICATION_TASKS = frozenset({"sex", "smoking", "quality"})
REGRESSION_TASKS = frozenset(TASKS) - CLASSIFICATION_TASKS

FUSED = "FUSED"
_EYES = ("L", "R", FUSED)

__all__ = [
    "TASKS",
    "CLASSIFICATION_TASKS",
    "REGRESSION_TASKS",
    "FUSED",
    "PredictionRecord",
    "FusionResult",
    "fuse_pair",
    "fuse_all",
    "read_predictions",
    "write_predictions",
]


@dataclass(frozen=True)
class PredictionRecord:
    """One model output for (participant, eye, task).

    ``value`` is a probability for classification tasks and carries the
    task's physical units for regression tasks.
    """

    participant_id: str
    eye: str
    task: str
    value: float
    model_id: str = ""
    split: str = ""

    def __post_init__(self):
        if self.eye not in _EYES:
            raise ValueError(f"eye must be one of {_EYES}, got {self.eye!r}")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.task in CLASSIFICATION_TASKS and not 0.0 <= self.value <= 1.0:
            raise ValueError(
                f"classification value must lie in [0, 1], got {self.value}"
            )


def fuse_pair(left: PredictionRecord, right: PredictionRecord) -> PredictionRecord:
    """Average one participant's left and right predictions.

    The arguments may come in either eye order; the result is symmetric.

    Raises:
        MismatchedPair: the two records differ in participant, task,
            model, or split, or are not one L and one R.
    """
    for attname in ("participant_id", "task", "model_id", "split"):
        if getattr(left, attname) != getattr(right, attname):
            raise MismatchedPair(
                f"{attname} differs: {getattr(left, attname)!r} vs "
                f"{getattr(right, attname)!r}"
            )
    if {left.eye, right.eye} != {"L", "R"}:
        raise MismatchedPair(f"need one L and one R record, got {left.eye}/{right.eye}")
    return replace(left, eye=FUSED, value=(left.value + right.value) / 2.0)


@dataclass(frozen=True)
class FusionResult:
    fused: tuple[PredictionRecord, ...]
    skipped_single_eye: int


def fuse_all(predictions: Iterable[PredictionRecord]) -> FusionResult:
    """Fuse every complete L/R pair; count participants with a lone eye.

    Records are grouped by (participant, task, model, split). FUSED input
    records are ignored.
    """
    groups: dict[tuple, dict[str, PredictionRecord]] = {}
    for p in predictions:
        if p.eye == FUSED:
            continue
        key = (p.participant_id, p.task, p.model_id, p.split)
        bucket = groups.setdefault(key, {})
        if p.eye in bucket:
            raise DuplicatePrediction(f"duplicate prediction for {key + (p.eye,)}")
        bucket[p.eye] = p

    fused: list[PredictionRecord] = []
    skipped = 0
    for key in sorted(groups):
        bucket = groups[key]
        if len(bucket) == 2:
            fused.append(fuse_pair(bucket["L"], bucket["R"]))
        else:
            skipped += 1
    return FusionResult(fused=tuple(fused), skipped_single_eye=skipped)


# --- file format --------------------------------------------------------------

_HEADER = ["participant_id", "eye", "task", "value", "model_id", "split"]


def write_predictions(path: str | Path, predictions: Sequence[PredictionRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_HEADER)
        for p in predictions:
            writer.writerow([p.participant_id, p.eye, p.task, repr(p.value),
                             p.model_id, p.split])


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    out: list[PredictionRecord] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != _HEADER:
            raise SchemaError(f"{path}: expected header {','.join(_HEADER)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                out.append(PredictionRecord(
                    participant_id=row[0].strip(), eye=row[1].strip(), task=row[2].strip(),
                    value=float(row[3]), model_id=row[4].strip(), split=row[5].strip(),
                ))
            except (IndexError, ValueError) as err:
                raise SchemaError(f"{path}:{line_no}: bad prediction row {row}: {err}") from None
    return out

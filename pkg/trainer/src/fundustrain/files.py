"""Readers and writers for the shared pipeline file formats.

The harness talks to the preprocessing toolkit only through files, so
the formats are re-implemented here from their documented contracts:

- FPT1 tensors: 16-byte header (magic ``FPT1``, height/width/channels as
  little-endian u32) followed by row-major little-endian float32 data;
  one file per image named ``{participant_id}_{eye}.fpt``.
- manifest CSV with the fixed twelve-column header; empty cell means
  missing, repeated readings are ``|``-separated.
- split CSV ``participant_id,subset``; quality labels CSV
  ``participant_id,eye,label``.
- predictions CSV ``participant_id,eye,task,value,model_id,split``.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .exceptions import FileFormatError

TENSOR_MAGIC = b"FPT1"
_TENSOR_HEADER = struct.Struct("<4sIII")

MANIFEST_COLUMNS = (
    "participant_id", "left_image", "right_image", "age", "sex", "smoking",
    "bmi", "sbp", "dbp", "hba1c", "cholesterol", "ethnicity",
)

REGRESSION_TASKS = ("age", "bmi", "sbp", "dbp", "hba1c", "cholesterol")
CLASSIFICATION_TASKS = ("sex", "smoking", "quality")
TASKS = REGRESSION_TASKS + CLASSIFICATION_TASKS


def _read_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as err:
        raise FileFormatError(f"cannot read {path}: {err}") from None


def _open_csv(path: str | Path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as err:
        raise FileFormatError(f"cannot read {path}: {err}") from None


def read_tensor(path: str | Path) -> np.ndarray:
    """Load one FPT1 file as a float32 (height, width, channels) array."""
    raw = _read_bytes(path)
    if len(raw) < _TENSOR_HEADER.size:
        raise FileFormatError(f"{path}: truncated header")
    magic, h, w, c = _TENSOR_HEADER.unpack_from(raw)
    if magic != TENSOR_MAGIC:
        raise FileFormatError(f"{path}: bad magic {magic!r}")
    if len(raw) != _TENSOR_HEADER.size + 4 * h * w * c:
        raise FileFormatError(f"{path}: size does not match {h}x{w}x{c}")
    data = np.frombuffer(raw, dtype="<f4", offset=_TENSOR_HEADER.size)
    return data.reshape(h, w, c).copy()


def _mean_readings(cell: str) -> float:
    parts = [float(p) for p in cell.split("|")]
    return sum(parts) / len(parts)


def read_manifest_labels(path: str | Path) -> dict[str, dict[str, float]]:
    """Per-participant task labels; missing and unknown values are omitted.

    Sex is encoded male=1/female=0 and smoking current=1, never or
    previous=0 (other codes are treated as missing). Repeated blood
    pressure readings are averaged.
    """
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise FileFormatError(f"{path}: unexpected manifest header {header}")
        labels: dict[str, dict[str, float]] = {}
        for row in reader:
            if not row or len(row) != len(MANIFEST_COLUMNS):
                continue
            cells = dict(zip(MANIFEST_COLUMNS, (c.strip() for c in row)))
            pid = cells["participant_id"]
            entry: dict[str, float] = {}
            for task in ("age", "bmi", "hba1c", "cholesterol"):
                if cells[task]:
                    entry[task] = float(cells[task])
            for task in ("sbp", "dbp"):
                if cells[task]:
                    entry[task] = _mean_readings(cells[task])
            if cells["sex"].lower() in ("male", "female"):
                entry["sex"] = 1.0 if cells["sex"].lower() == "male" else 0.0
            smoking = cells["smoking"].lower()
            if smoking == "current":
                entry["smoking"] = 1.0
            elif smoking in ("never", "previous"):
                entry["smoking"] = 0.0
            labels[pid] = entry
    return labels


def read_split(path: str | Path) -> dict[str, str]:
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["participant_id", "subset"]:
            raise FileFormatError(f"{path}: expected header participant_id,subset")
        return {row[0].strip(): row[1].strip() for row in reader if row}


def read_quality_labels(path: str | Path) -> dict[tuple[str, str], float]:
    """Gate decisions as training targets: good -> 1.0, bad -> 0.0."""
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["participant_id", "eye", "label"]:
            raise FileFormatError(f"{path}: expected header participant_id,eye,label")
        out: dict[tuple[str, str], float] = {}
        for row in reader:
            if not row:
                continue
            label = row[2].strip()
            if label not in ("good", "bad"):
                raise FileFormatError(f"{path}: unknown label {label!r}")
            out[(row[0].strip(), row[1].strip())] = 1.0 if label == "good" else 0.0
    return out


def write_predictions(path: str | Path, rows) -> None:
    """Rows are (participant_id, eye, task, value, model_id, split)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "eye", "task", "value", "model_id", "split"])
        for pid, eye, task, value, model_id, split in rows:
            writer.writerow([pid, eye, task, repr(float(value)), model_id, split])


def tensor_path(tensor_dir: str | Path, participant_id: str, eye: str) -> Path:
    return Path(tensor_dir) / f"{participant_id}_{eye}.fpt"


# --- checkpoint sidecar ---------------------------------------------------------


def write_meta(path: str | Path, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(meta):
            fh.write(f"{key}={meta[key]}\n")


def read_meta(path: str | Path) -> dict[str, str]:
    meta: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition("=")
        if not _:
            raise FileFormatError(f"{path}: bad meta line {line!r}")
        meta[key] = value
    return meta

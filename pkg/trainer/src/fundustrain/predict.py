"""Inference: load a checkpoint, score tensors, export the shared
predictions file.
"""

from __future__ import annotations

from pathlib import Path

import torch

from .exceptions import ShapeMismatch
from .files import read_manifest_labels, read_split, read_tensor, tensor_path, write_predictions
from .models import build_model
from .train import EYES


def load_checkpoint(checkpoint_dir: str | Path):
    """Rebuild the model from a checkpoint directory; dropout disabled."""
    payload = torch.load(Path(checkpoint_dir) / "checkpoint.pt",
                         map_location="cpu", weights_only=True)
    model = build_model(payload["head_variant"], payload["backbone"],
                        payload["classification"], payload["keep_rate"])
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model, payload


def predict(
    checkpoint_dir: str | Path,
    tensor_dir: str | Path,
    ids: list[tuple[str, str]],
    split_tag: str,
    out_path: str | Path | None = None,
    batch_size: int = 32,
) -> list[tuple]:
    """One prediction row per (participant, eye).

    Classification values are sigmoid probabilities in [0, 1];
    regression values are de-standardized back to task units.

    Raises:
        ShapeMismatch: a tensor's size differs from the training size.
    """
    model, payload = load_checkpoint(checkpoint_dir)
    expected_hw = tuple(payload["input_hw"])
    planes = []
    for pid, eye in ids:
        arr = read_tensor(tensor_path(tensor_dir, pid, eye))
        if arr.shape[:2] != expected_hw:
            raise ShapeMismatch(
                f"{pid}_{eye}: tensor is {arr.shape[:2]}, checkpoint expects {expected_hw}"
            )
        planes.append(torch.from_numpy(arr.transpose(2, 0, 1)))
    rows = []
    with torch.no_grad():
        for start in range(0, len(planes), batch_size):
            xb = torch.stack(planes[start:start + batch_size])
            out = model(xb)
            if not payload["classification"]:
                out = out * payload["target_std"] + payload["target_mean"]
            for (pid, eye), value in zip(ids[start:start + batch_size], out.tolist()):
                rows.append((pid, eye, payload["task"], float(value),
                             payload["model_id"], split_tag))
    if out_path is not None:
        write_predictions(out_path, rows)
    return rows


def predict_from_files(
    checkpoint_dir: str | Path,
    tensor_dir: str | Path,
    manifest_path: str | Path,
    split_path: str | Path,
    subset: str,
    out_path: str | Path,
) -> list[tuple]:
    """Score every tensor of the participants in one subset."""
    manifest = read_manifest_labels(manifest_path)
    split = read_split(split_path)
    ids = []
    for pid in sorted(manifest):
        if split.get(pid) != subset:
            continue
        for eye in EYES:
            if tensor_path(tensor_dir, pid, eye).exists():
                ids.append((pid, eye))
    return predict(checkpoint_dir, tensor_dir, ids, subset, out_path)

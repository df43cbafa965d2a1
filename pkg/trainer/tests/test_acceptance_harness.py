"""Acceptance gate for the training harness (run with ``pytest -s`` to
see the PASS lines).
"""

import time

import pytest
import torch

from fundustrain.config import TrainConfig
from fundustrain.predict import load_checkpoint, predict_from_files
from fundustrain.train import EarlyStopper, train, undersample_items

from harness_data import brightness_set, imbalanced_set


def test_tiny_backbone_overfit_and_early_stop_and_freeze(tmp_path):
    """Regression on 50 brightness-labeled images reaches train MAE below
    5% of the label range within 200 epochs; early stopping halts exactly
    patience epochs after the best; last_layers_only leaves the backbone
    bit-identical."""
    started = time.perf_counter()
    train_set = brightness_set(50, 0)
    val_set = brightness_set(20, 1)
    label_range = float(train_set.y.max() - train_set.y.min())

    cfg = TrainConfig(task="age", backbone="tiny-test", regime="full_finetune",
                      augment=False, max_epochs=200, patience=50, seed=0)
    meta, history = train(cfg, train_set, val_set, tmp_path / "overfit")
    model, payload = load_checkpoint(tmp_path / "overfit")
    with torch.no_grad():
        pred = model(train_set.x) * payload["target_std"] + payload["target_mean"]
    train_mae = float((pred - train_set.y).abs().mean())
    assert len(history) <= 200
    assert train_mae < 0.05 * label_range

    # constructed plateau: patience 3 halts exactly 3 epochs after best
    stopper = EarlyStopper(patience=3)
    stopped_at = None
    for epoch, loss in enumerate([1.0, 0.7, 0.7, 0.7, 0.7, 0.7, 0.7]):
        stopper.update(epoch, loss)
        if stopper.should_stop:
            stopped_at = epoch
            break
    assert stopper.best_epoch == 1 and stopped_at == 4

    # frozen-backbone regime: parameters bit-identical to initialization
    frozen_cfg = TrainConfig(task="age", backbone="tiny-test",
                             regime="last_layers_only", augment=False,
                             max_epochs=10, seed=0)
    torch.manual_seed(frozen_cfg.seed)
    from fundustrain.models import build_model
    reference = build_model(frozen_cfg.head_variant, frozen_cfg.backbone,
                            frozen_cfg.classification, frozen_cfg.keep_rate)
    before = {k: v.clone() for k, v in reference.backbone.state_dict().items()}
    train(frozen_cfg, train_set, val_set, tmp_path / "frozen")
    frozen_model, _ = load_checkpoint(tmp_path / "frozen")
    for key, value in frozen_model.backbone.state_dict().items():
        assert torch.equal(before[key], value), key

    elapsed = time.perf_counter() - started
    print(f"\nPASS tiny-backbone: train MAE {train_mae:.3f} < "
          f"{0.05 * label_range:.3f} (5% of range) in {len(history)} epochs; "
          f"early stop at best+3; frozen backbone bit-identical ({elapsed:.0f}s)")


def test_imbalance_handling(tmp_path):
    """Weighted BCE lifts recall at 0.5 over the unweighted run with the
    same seed on a 10%-positive set; undersampling produces exactly the
    configured class counts (the 1,470/1,500 pattern)."""
    train_set = imbalanced_set(200, 0, pos_rate=0.10)
    val_set = imbalanced_set(80, 1, pos_rate=0.10)

    def recall_at_half(loss, imbalance, out):
        cfg = TrainConfig(task="smoking", backbone="tiny-test", loss=loss,
                          imbalance=imbalance, augment=False, max_epochs=60,
                          patience=50, seed=0)
        train(cfg, train_set, val_set, out)
        model, _ = load_checkpoint(out)
        with torch.no_grad():
            prob = model(train_set.x)
        positives = train_set.y >= 0.5
        return float(((prob >= 0.5) & positives).sum() / positives.sum())

    recall_plain = recall_at_half("bce", "none", tmp_path / "plain")
    recall_weighted = recall_at_half("weighted_bce", "weighted", tmp_path / "weighted")
    assert recall_weighted > recall_plain

    items = ([(f"s{i}", "L", 1.0) for i in range(1470)]
             + [(f"n{i}", "L", 0.0) for i in range(20000)])
    kept = undersample_items(items, n_majority=1500, seed=0)
    n_pos = sum(1 for _, _, y in kept if y == 1.0)
    n_neg = sum(1 for _, _, y in kept if y == 0.0)
    assert (n_pos, n_neg) == (1470, 1500)

    print(f"PASS imbalance: recall {recall_plain:.3f} -> {recall_weighted:.3f} "
          f"with weighted BCE; undersample kept exactly 1470/1500")


def test_interop_with_preprocessing_toolkit(tmp_path):
    """End-to-end across the file boundary: the preprocessing toolkit's
    synth + preprocess + split outputs feed training, and the exported
    predictions parse back into its evaluation pipeline."""
    funduskit_cli = pytest.importorskip("funduskit.cli")
    data, out = tmp_path / "data", tmp_path / "out"
    assert funduskit_cli.main(["--output", str(data), "--seed", "2", "synth",
                               "--participants", "25", "--image-size", "96"]) == 0
    assert funduskit_cli.main(["--output", str(out), "preprocess",
                               "--manifest", str(data / "manifest.csv"),
                               "--target-size", "48"]) == 0
    assert funduskit_cli.main(["--output", str(out), "--seed", "2", "split",
                               "--manifest", str(data / "manifest.csv")]) == 0

    cfg = TrainConfig(task="age", backbone="tiny-test", augment=False,
                      max_epochs=40, patience=50, seed=0)
    from fundustrain.train import train_from_files
    meta, history = train_from_files(cfg, out / "tensors", data / "manifest.csv",
                                     out / "split.csv", tmp_path / "ck")
    rows = predict_from_files(tmp_path / "ck", out / "tensors",
                              data / "manifest.csv", out / "split.csv",
                              "test", tmp_path / "predictions.csv")
    assert rows

    from funduskit.fusion import read_predictions
    parsed = read_predictions(tmp_path / "predictions.csv")
    assert len(parsed) == len(rows)
    assert {p.eye for p in parsed} == {"L", "R"}
    assert all(p.model_id == meta.model_id for p in parsed)
    print(f"PASS interop: trained on toolkit tensors, exported "
          f"{len(parsed)} predictions the toolkit parses back")

import numpy as np
import pytest
import torch

from fundustrain.config import TrainConfig
from fundustrain.exceptions import EmptySplit
from fundustrain.files import read_meta
from fundustrain.predict import load_checkpoint
from fundustrain.train import (
    EarlyStopper,
    batch_loss,
    build_items,
    class_weight_pair,
    train,
    train_from_files,
    undersample_items,
)

from harness_data import brightness_set, cohort_files


class TestEarlyStopper:
    def test_constructed_plateau_stops_exactly_patience_after_best(self):
        stopper = EarlyStopper(patience=3)
        schedule = [1.0, 0.8, 0.9, 0.9, 0.9, 0.9, 0.9]
        stopped_at = None
        for epoch, loss in enumerate(schedule):
            stopper.update(epoch, loss)
            if stopper.should_stop:
                stopped_at = epoch
                break
        assert stopper.best_epoch == 1
        assert stopped_at == 4  # exactly best + patience

    def test_improvement_resets_counter(self):
        stopper = EarlyStopper(patience=2)
        for epoch, loss in enumerate([1.0, 0.9, 0.95, 0.8]):
            stopper.update(epoch, loss)
            assert not stopper.should_stop
        assert stopper.best_epoch == 3

    def test_equal_loss_is_not_improvement(self):
        stopper = EarlyStopper(patience=1)
        stopper.update(0, 0.5)
        assert not stopper.update(1, 0.5)
        assert stopper.should_stop


class TestLosses:
    def test_weighted_bce_with_unit_weights_equals_bce(self):
        torch.manual_seed(0)
        pred = torch.rand(64)
        target = (torch.rand(64) < 0.3).float()
        unweighted = batch_loss(pred, target, "bce")
        weighted = batch_loss(pred, target, "weighted_bce", weights=(1.0, 1.0))
        assert torch.allclose(unweighted, weighted)

    def test_weighted_bce_upweights_positives(self):
        pred = torch.tensor([0.1, 0.9])
        target = torch.tensor([1.0, 0.0])
        light = batch_loss(pred, target, "weighted_bce", weights=(1.0, 1.0))
        heavy = batch_loss(pred, target, "weighted_bce", weights=(1.0, 5.0))
        assert heavy > light

    def test_mae(self):
        pred = torch.tensor([1.0, 2.0])
        target = torch.tensor([2.0, 4.0])
        assert float(batch_loss(pred, target, "mae")) == pytest.approx(1.5)

    def test_class_weight_pair(self):
        targets = torch.cat([torch.ones(100), torch.zeros(900)])
        w_neg, w_pos = class_weight_pair(targets)
        assert w_pos == pytest.approx(5.0)
        assert w_neg == pytest.approx(1000 / 1800)
        with pytest.raises(EmptySplit):
            class_weight_pair(torch.ones(10))


class TestUndersample:
    def items(self, n_pos, n_neg):
        return ([(f"s{i}", "L", 1.0) for i in range(n_pos)]
                + [(f"n{i}", "L", 0.0) for i in range(n_neg)])

    def test_exact_counts(self):
        kept = undersample_items(self.items(20, 100), n_majority=30, seed=0)
        assert sum(1 for _, _, y in kept if y == 1.0) == 20
        assert sum(1 for _, _, y in kept if y == 0.0) == 30

    def test_default_matches_minority(self):
        kept = undersample_items(self.items(15, 80), n_majority=None, seed=1)
        assert sum(1 for _, _, y in kept if y == 0.0) == 15

    def test_seeded(self):
        a = undersample_items(self.items(5, 50), 10, seed=3)
        b = undersample_items(self.items(5, 50), 10, seed=3)
        assert a == b

    def test_not_enough(self):
        with pytest.raises(EmptySplit):
            undersample_items(self.items(5, 10), 20, seed=0)


class TestBuildItems:
    MANIFEST = {
        "p1": {"age": 55.0, "sex": 1.0},
        "p2": {"sex": 0.0},           # age missing
        "p3": {"age": 60.0},
    }
    SPLIT = {"p1": "train", "p2": "train", "p3": "val"}

    def test_missing_label_discards_for_that_task_only(self):
        age_items = build_items("age", self.MANIFEST, self.SPLIT, "train")
        assert {pid for pid, _, _ in age_items} == {"p1"}
        sex_items = build_items("sex", self.MANIFEST, self.SPLIT, "train")
        assert {pid for pid, _, _ in sex_items} == {"p1", "p2"}

    def test_both_eyes_expanded(self):
        items = build_items("age", self.MANIFEST, self.SPLIT, "train")
        assert [(pid, eye) for pid, eye, _ in items] == [("p1", "L"), ("p1", "R")]

    def test_quality_items_from_gate_labels(self):
        labels = {("p1", "L"): 1.0, ("p1", "R"): 0.0, ("p3", "L"): 1.0}
        items = build_items("quality", self.MANIFEST, self.SPLIT, "train",
                            quality_labels=labels)
        assert items == [("p1", "L", 1.0), ("p1", "R", 0.0)]


class TestTrainLoop:
    def small_cfg(self, **overrides):
        base = dict(task="age", backbone="tiny-test", augment=False,
                    max_epochs=8, patience=50, seed=0)
        base.update(overrides)
        return TrainConfig(**base)

    def test_history_and_meta(self, tmp_path):
        meta, history = train(self.small_cfg(), brightness_set(40, 0),
                              brightness_set(16, 1), tmp_path / "ck")
        assert len(history) == 8
        assert meta.task == "age"
        assert meta.best_val_loss == min(h["val_loss"] for h in history)
        assert history[meta.epoch]["val_loss"] == meta.best_val_loss
        sidecar = read_meta(tmp_path / "ck" / "checkpoint.meta")
        assert sidecar["model_id"] == meta.model_id
        assert float(sidecar["best_val_loss"]) == meta.best_val_loss

    def test_deterministic_given_seed(self, tmp_path):
        results = []
        for name in ("a", "b"):
            meta, history = train(self.small_cfg(), brightness_set(40, 0),
                                  brightness_set(16, 1), tmp_path / name)
            results.append((meta.best_val_loss, tuple(h["val_loss"] for h in history)))
        assert results[0] == results[1]

    def test_last_layers_only_freezes_backbone_bits(self, tmp_path):
        cfg = self.small_cfg(regime="last_layers_only")
        torch.manual_seed(cfg.seed)
        from fundustrain.models import build_model
        reference = build_model(cfg.head_variant, cfg.backbone, cfg.classification,
                                cfg.keep_rate)
        before = {k: v.clone() for k, v in reference.backbone.state_dict().items()}

        train(cfg, brightness_set(40, 0), brightness_set(16, 1), tmp_path / "ck")
        model, _ = load_checkpoint(tmp_path / "ck")
        after = model.backbone.state_dict()
        assert before.keys() == after.keys()
        for key in before:
            assert torch.equal(before[key], after[key]), key

    def test_full_finetune_updates_backbone(self, tmp_path):
        cfg = self.small_cfg(regime="full_finetune")
        torch.manual_seed(cfg.seed)
        from fundustrain.models import build_model
        reference = build_model(cfg.head_variant, cfg.backbone, cfg.classification,
                                cfg.keep_rate)
        before = {k: v.clone() for k, v in reference.backbone.state_dict().items()}
        train(cfg, brightness_set(40, 0), brightness_set(16, 1), tmp_path / "ck")
        model, _ = load_checkpoint(tmp_path / "ck")
        assert any(not torch.equal(before[k], v)
                   for k, v in model.backbone.state_dict().items())

    def test_checkpoint_reproduces_best_val_loss(self, tmp_path):
        from fundustrain.train import _evaluate_loss

        val_set = brightness_set(16, 1)
        meta, _ = train(self.small_cfg(max_epochs=12), brightness_set(40, 0),
                        val_set, tmp_path / "ck")
        model, payload = load_checkpoint(tmp_path / "ck")
        y = (val_set.y - payload["target_mean"]) / payload["target_std"]
        recomputed = _evaluate_loss(model, val_set.x, y, "mae", None, 32)
        assert recomputed == pytest.approx(meta.best_val_loss, abs=1e-5)

    def test_empty_split_raises(self, tmp_path):
        tensors, manifest, split = cohort_files(tmp_path, n=5, seed=0)
        # every participant forced into test: no training examples remain
        lines = split.read_text().splitlines()
        split.write_text("\n".join(
            [lines[0]] + [line.split(",")[0] + ",test" for line in lines[1:]]) + "\n")
        with pytest.raises(EmptySplit):
            train_from_files(self.small_cfg(), tensors, manifest, split,
                             tmp_path / "ck")

    def test_missing_files_report_cleanly(self, tmp_path):
        from fundustrain.exceptions import FileFormatError
        with pytest.raises(FileFormatError):
            train_from_files(self.small_cfg(), tmp_path, tmp_path / "x.csv",
                             tmp_path / "y.csv", tmp_path / "ck")


class TestTrainFromFiles:
    def test_file_cohort_trains(self, tmp_path):
        tensors, manifest, split = cohort_files(tmp_path, n=15, seed=2)
        cfg = TrainConfig(task="age", backbone="tiny-test", augment=False,
                          max_epochs=5, seed=0)
        meta, history = train_from_files(cfg, tensors, manifest, split,
                                         tmp_path / "ck")
        assert len(history) == 5
        assert (tmp_path / "ck" / "checkpoint.pt").exists()
        assert (tmp_path / "ck" / "checkpoint.meta").exists()

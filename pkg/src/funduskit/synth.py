"""Synthetic dataset generator for tests and demos.

Produces a self-consistent mini cohort: disk-on-black eye images whose
brightness tracks age, a manifest with realistic label distributions and
missingness, per-eye quality scores, and per-eye predictions built as
truth plus independent noise (so fusing the two eyes genuinely helps).
Everything is driven by one seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import ParticipantRecord, grouped_split, write_manifest
from .fusion import CLASSIFICATION_TASKS, PredictionRecord, write_predictions
from .imaging import ImageBuffer, RangeTag
from .quality import QualityScore, write_scores
from .reports import truth_value
from .tensorio import write_image

DEFAULT_TASKS = ("age", "sex", "smoking", "bmi", "sbp", "dbp", "hba1c", "cholesterol")

# Per-eye prediction noise, roughly half the population SD of each task.
_NOISE_SCALE = {
    "age": 3.5, "bmi": 3.0, "sbp": 11.0, "dbp": 6.5, "hba1c": 4.5,
    "cholesterol": 0.8,
}

__all__ = ["SynthConfig", "generate_dataset", "synthetic_fundus", "make_records"]


@dataclass(frozen=True)
class SynthConfig:
    participants: int = 40
    seed: int = 0
    image_size: int = 256
    male_rate: float = 0.43
    smoking_current_rate: float = 0.20
    smoking_previous_rate: float = 0.25
    british_irish_rate: float = 0.70
    good_rate_left: float = 0.85
    good_rate_right: float = 0.90
    missing_label_rate: float = 0.02
    ratios: tuple[float, float, float] = (0.60, 0.20, 0.20)
    model_id: str = "synth-v1"
    tasks: tuple[str, ...] = DEFAULT_TASKS


def synthetic_fundus(size: int, brightness: float, rng: np.random.Generator) -> ImageBuffer:
    """A disk on black background with radial falloff and pixel noise."""
    center = (size - 1) / 2.0 + rng.uniform(-size * 0.02, size * 0.02, size=2)
    radius = size * rng.uniform(0.34, 0.42)
    yy, xx = np.ogrid[:size, :size]
    dist2 = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    inside = dist2 <= radius**2
    profile = np.clip(1.0 - 0.45 * dist2 / radius**2, 0.0, 1.0)
    channel_gain = np.array([1.0, 0.72, 0.45])
    img = brightness * profile[:, :, None] * channel_gain[None, None, :]
    img += rng.normal(0.0, 6.0, size=img.shape)
    img *= inside[:, :, None]
    return ImageBuffer(np.clip(np.rint(img), 0, 255).astype(np.uint8), RangeTag.BYTE255)


def _smoking_status(u: float, cfg: SynthConfig) -> str:
    if u < cfg.smoking_current_rate:
        return "current"
    if u < cfg.smoking_current_rate + cfg.smoking_previous_rate:
        return "previous"
    return "never"


def make_records(cfg: SynthConfig, rng: np.random.Generator,
                 image_dir: str = "images") -> list[ParticipantRecord]:
    """Participant records with plausible label distributions."""
    records = []
    for i in range(cfg.participants):
        pid = f"P{i:05d}"
        age = float(rng.uniform(40.0, 70.0))
        sbp_mean = float(rng.normal(136.0, 15.0))
        n_readings = int(rng.integers(1, 3))
        sbp = tuple(round(sbp_mean + rng.normal(0, 3.0), 1) for _ in range(n_readings))
        dbp_mean = float(rng.normal(81.7, 9.0))
        dbp = tuple(round(dbp_mean + rng.normal(0, 2.0), 1) for _ in range(n_readings))

        def maybe(value):
            return None if rng.uniform() < cfg.missing_label_rate else value

        ethnicity = ("british" if rng.uniform() < cfg.british_irish_rate
                     else str(rng.choice(["indian", "caribbean", "african",
                                          "chinese", "other"])))
        records.append(ParticipantRecord(
            participant_id=pid,
            left_image=f"{image_dir}/{pid}_L.png",
            right_image=f"{image_dir}/{pid}_R.png",
            age=round(age, 2),
            sex="male" if rng.uniform() < cfg.male_rate else "female",
            smoking_raw=maybe(_smoking_status(float(rng.uniform()), cfg)),
            bmi=maybe(round(float(rng.normal(27.1, 4.7)), 2)),
            sbp=maybe(sbp),
            dbp=maybe(dbp),
            hba1c=maybe(round(float(rng.normal(35.6, 6.4)), 2)),
            cholesterol=maybe(round(float(rng.normal(5.7, 1.1)), 3)),
            ethnicity=ethnicity,
            british_irish=(ethnicity == "british"),
        ))
    return records


def _quality_scores(records, cfg: SynthConfig, rng: np.random.Generator):
    scores = []
    for r in records:
        for eye, rate in (("L", cfg.good_rate_left), ("R", cfg.good_rate_right)):
            good = rng.uniform() < rate
            u = float(rng.uniform())
            score = 0.5 + 0.5 * u if good else 0.499 * u
            scores.append(QualityScore(r.participant_id, eye, min(score, 1.0)))
    return scores


def _predictions(records, split, cfg: SynthConfig, rng: np.random.Generator):
    preds = []
    for r in records:
        for task in cfg.tasks:
            truth = truth_value(r, task)
            if truth is None:
                continue
            for eye in ("L", "R"):
                if task in CLASSIFICATION_TASKS:
                    value = float(np.clip(
                        0.5 + 0.34 * (2.0 * truth - 1.0) + rng.normal(0.0, 0.17),
                        0.001, 0.999,
                    ))
                else:
                    value = float(truth + rng.normal(0.0, _NOISE_SCALE[task]))
                preds.append(PredictionRecord(
                    participant_id=r.participant_id, eye=eye, task=task,
                    value=value, model_id=cfg.model_id,
                    split=split[r.participant_id],
                ))
    return preds


def generate_dataset(out_dir: str | Path, cfg: SynthConfig = SynthConfig()) -> dict[str, Path]:
    """Write images, manifest, quality scores, and predictions under ``out_dir``.

    The predictions carry split tags from a grouped split with the same
    ratios and seed as the config, so a separately run ``split`` command
    over the same manifest reproduces them exactly.
    """
    out = Path(out_dir)
    image_dir = out / "images"
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)

    records = make_records(cfg, rng)
    for r in records:
        brightness = 80.0 + 3.0 * ((r.age or 55.0) - 40.0)
        for eye in ("L", "R"):
            img = synthetic_fundus(cfg.image_size, brightness, rng)
            write_image(out / r.image_for(eye), img)

    split = grouped_split(records, cfg.ratios, cfg.seed)

    paths = {
        "manifest": out / "manifest.csv",
        "quality_scores": out / "quality_scores.csv",
        "predictions": out / "predictions.csv",
        "images": image_dir,
    }
    write_manifest(paths["manifest"], records)
    write_scores(paths["quality_scores"], _quality_scores(records, cfg, rng))
    write_predictions(paths["predictions"], _predictions(records, split, cfg, rng))
    return paths

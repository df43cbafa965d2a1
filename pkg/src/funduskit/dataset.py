"""Manifest ingestion, label construction, and person-grouped splitting.

The manifest is a UTF-8 CSV with the exact header::

    participant_id,left_image,right_image,age,sex,smoking,bmi,sbp,dbp,hba1c,cholesterol,ethnicity

An empty cell means "missing". Fields that can carry repeated
measurements (sbp, dbp) separate readings with ``|`` inside one cell.

Splits are assigned at participant level so both eyes of a person always
land in the same subset, and all assignment is seeded and deterministic.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .exceptions import (
    BadRatios,
    DuplicateParticipant,
    EmptyClass,
    EmptyReadings,
    NotEnoughMajority,
    SchemaError,
    UnparseableValue,
)

MANIFEST_COLUMNS = (
    "participant_id", "left_image", "right_image", "age", "sex", "smoking",
    "bmi", "sbp", "dbp", "hba1c", "cholesterol", "ethnicity",
)

SUBSETS = ("train", "val", "test")

# Ethnicity strings counted as british/irish; override via load_manifest().
DEFAULT_BRITISH_IRISH = frozenset(
    {"british", "irish", "british/irish", "white british", "white irish"}
)

__all__ = [
    "MANIFEST_COLUMNS",
    "SUBSETS",
    "DEFAULT_BRITISH_IRISH",
    "ParticipantRecord",
    "SplitAssignment",
    "ClassWeights",
    "load_manifest",
    "write_manifest",
    "aggregate_measurements",
    "binarize_smoking",
    "grouped_split",
    "stratified_split",
    "undersample_majority",
    "class_weights",
]


@dataclass(frozen=True)
class ParticipantRecord:
    """One person: image references, risk-factor labels, demographics.

    Any label may be missing (None). ``sbp`` and ``dbp`` keep every
    reading; aggregate with :func:`aggregate_measurements` when a single
    value is needed.
    """

    participant_id: str
    left_image: str | None = None
    right_image: str | None = None
    age: float | None = None
    sex: str | None = None            # "male" | "female"
    smoking_raw: str | None = None    # "never" | "previous" | "current" | other codes
    bmi: float | None = None
    sbp: tuple[float, ...] | None = None
    dbp: tuple[float, ...] | None = None
    hba1c: float | None = None
    cholesterol: float | None = None
    ethnicity: str | None = None
    british_irish: bool | None = None

    def image_for(self, eye: str) -> str | None:
        if eye == "L":
            return self.left_image
        if eye == "R":
            return self.right_image
        raise ValueError(f"unknown eye {eye!r}")


def _parse_float(raw: str) -> float:
    value = float(raw)
    if not np.isfinite(value):
        raise ValueError("non-finite value")
    return value


def _parse_readings(raw: str) -> tuple[float, ...]:
    return tuple(_parse_float(part) for part in raw.split("|"))


def load_manifest(
    path: str | Path,
    british_irish_values: frozenset[str] = DEFAULT_BRITISH_IRISH,
) -> list[ParticipantRecord]:
    """Parse a manifest CSV into participant records.

    Raises:
        SchemaError: header does not exactly match ``MANIFEST_COLUMNS``.
        DuplicateParticipant: the same id appears twice.
        UnparseableValue: one or more cells fail to parse; all bad cells
            are collected over the full file and reported together.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != MANIFEST_COLUMNS:
            raise SchemaError(
                f"{path}: header {header} does not match {list(MANIFEST_COLUMNS)}"
            )
        records: list[ParticipantRecord] = []
        seen: set[str] = set()
        problems: list[tuple[int, str, str, str]] = []

        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                problems.append((line_no, "<row>", ",".join(row),
                                 f"expected {len(MANIFEST_COLUMNS)} cells, got {len(row)}"))
                continue
            cells = {col: cell.strip() for col, cell in zip(MANIFEST_COLUMNS, row)}
            pid = cells["participant_id"]
            if not pid:
                problems.append((line_no, "participant_id", "", "missing id"))
                continue
            if pid in seen:
                raise DuplicateParticipant(f"{path}: duplicate participant_id {pid!r} "
                                           f"at line {line_no}")
            seen.add(pid)

            parsed: dict = {"participant_id": pid}
            parsed["left_image"] = cells["left_image"] or None
            parsed["right_image"] = cells["right_image"] or None
            parsed["smoking_raw"] = cells["smoking"].lower() or None
            ethnicity = cells["ethnicity"] or None
            parsed["ethnicity"] = ethnicity
            parsed["british_irish"] = (
                ethnicity.lower() in british_irish_values if ethnicity else None
            )

            sex = cells["sex"].lower() or None
            if sex is not None and sex not in ("male", "female"):
                problems.append((line_no, "sex", cells["sex"], "expected male/female"))
                sex = None
            parsed["sex"] = sex

            for col in ("age", "bmi", "hba1c", "cholesterol"):
                raw = cells[col]
                try:
                    parsed[col] = _parse_float(raw) if raw else None
                except ValueError:
                    problems.append((line_no, col, raw, "expected a number"))
                    parsed[col] = None
            for col in ("sbp", "dbp"):
                raw = cells[col]
                try:
                    parsed[col] = _parse_readings(raw) if raw else None
                except ValueError:
                    problems.append((line_no, col, raw, "expected |-separated numbers"))
                    parsed[col] = None

            records.append(ParticipantRecord(**parsed))

    if problems:
        raise UnparseableValue(problems)
    return records


def write_manifest(path: str | Path, records: Iterable[ParticipantRecord]) -> None:
    """Write records back out in the manifest schema."""
    def fmt(value) -> str:
        if value is None:
            return ""
        if isinstance(value, tuple):
            return "|".join(repr(v) for v in value)
        if isinstance(value, float):
            return repr(value)
        return str(value)

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            writer.writerow([
                r.participant_id, fmt(r.left_image), fmt(r.right_image), fmt(r.age),
                fmt(r.sex), fmt(r.smoking_raw), fmt(r.bmi), fmt(r.sbp), fmt(r.dbp),
                fmt(r.hba1c), fmt(r.cholesterol), fmt(r.ethnicity),
            ])


def aggregate_measurements(readings: Sequence[float]) -> float:
    """Arithmetic mean of repeated measurements taken at one visit."""
    if len(readings) == 0:
        raise EmptyReadings("no measurements to aggregate")
    return float(np.mean(readings))


def binarize_smoking(raw: str | None) -> int | None:
    """Collapse smoking status to current=1 vs not-current=0.

    "never" and "previous" map to 0, "current" to 1; anything else
    (including missing) maps to missing.
    """
    if raw is None:
        return None
    value = raw.strip().lower()
    if value == "current":
        return 1
    if value in ("never", "previous"):
        return 0
    return None


# --- splitting ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitAssignment:
    """Participant -> subset mapping plus the ratios and seed that built it."""

    assignments: Mapping[str, str]
    ratios: tuple[float, float, float] = (0.60, 0.20, 0.20)
    seed: int = 0

    def __getitem__(self, participant_id: str) -> str:
        return self.assignments[participant_id]

    def __len__(self) -> int:
        return len(self.assignments)

    def members(self, subset: str) -> list[str]:
        return [pid for pid, s in self.assignments.items() if s == subset]

    def sizes(self) -> dict[str, int]:
        counts = Counter(self.assignments.values())
        return {subset: counts.get(subset, 0) for subset in SUBSETS}

    def save(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["participant_id", "subset"])
            for pid in sorted(self.assignments):
                writer.writerow([pid, self.assignments[pid]])

    @classmethod
    def load(cls, path: str | Path,
             ratios: tuple[float, float, float] = (0.60, 0.20, 0.20),
             seed: int = 0) -> "SplitAssignment":
        assignments: dict[str, str] = {}
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["participant_id", "subset"]:
                raise SchemaError(f"{path}: expected header participant_id,subset")
            for row in reader:
                if not row:
                    continue
                pid, subset = row[0].strip(), row[1].strip()
                if subset not in SUBSETS:
                    raise SchemaError(f"{path}: unknown subset {subset!r}")
                assignments[pid] = subset
        return cls(assignments=assignments, ratios=ratios, seed=seed)


def _check_ratios(ratios: Sequence[float]) -> tuple[float, float, float]:
    if len(ratios) != len(SUBSETS):
        raise BadRatios(f"expected {len(SUBSETS)} ratios, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise BadRatios(f"negative ratio in {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios {ratios} sum to {sum(ratios)}, expected 1")
    return tuple(float(r) for r in ratios)  # type: ignore[return-value]


def _stratum_rng(seed: int, index: int) -> np.random.Generator:
    # Stream layout shared by grouped_split (stratum 0) and stratified_split
    # (stratum i), so a single-stratum stratified split reduces exactly to
    # the grouped one.
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _participant_ids(participants: Iterable) -> list[str]:
    ids = [getattr(p, "participant_id", p) for p in participants]
    dupes = [pid for pid, n in Counter(ids).items() if n > 1]
    if dupes:
        raise DuplicateParticipant(f"duplicate participant ids: {dupes[:5]}")
    return ids


def _assign(ids: list[str], ratios: tuple[float, float, float],
            rng: np.random.Generator) -> dict[str, str]:
    # Cumulative-floor boundaries keep every subset within one item of its
    # exact share, for any subset count and stratum size.
    order = rng.permutation(np.array(sorted(ids), dtype=object))
    n = len(order)
    b1 = int(np.floor(ratios[0] * n))
    b2 = int(np.floor((ratios[0] + ratios[1]) * n))
    assignment: dict[str, str] = {}
    for i, pid in enumerate(order):
        assignment[str(pid)] = SUBSETS[0] if i < b1 else SUBSETS[1] if i < b2 else SUBSETS[2]
    return assignment


def grouped_split(
    participants: Iterable,
    ratios: Sequence[float] = (0.60, 0.20, 0.20),
    seed: int = 0,
) -> SplitAssignment:
    """Shuffle participants with ``seed`` and assign subsets by cumulative ratio.

    Accepts :class:`ParticipantRecord` objects or bare id strings. Ids are
    sorted before shuffling so the result does not depend on input order.
    Both eyes of a participant share the assignment by construction.
    """
    checked = _check_ratios(ratios)
    ids = _participant_ids(participants)
    return SplitAssignment(assignments=_assign(ids, checked, _stratum_rng(seed, 0)),
                           ratios=checked, seed=seed)


def stratified_split(
    items: Iterable,
    ratios: Sequence[float] = (0.60, 0.20, 0.20),
    seed: int = 0,
    stratum_key: Callable = lambda item: 0,
) -> SplitAssignment:
    """Grouped split applied independently inside each stratum.

    Each stratum gets its own RNG stream derived from (seed, stratum
    index), so adding a stratum never reshuffles the others.
    """
    checked = _check_ratios(ratios)
    items = list(items)
    ids = _participant_ids(items)
    strata: dict = {}
    for item, pid in zip(items, ids):
        strata.setdefault(stratum_key(item), []).append(pid)

    assignments: dict[str, str] = {}
    for index, key in enumerate(sorted(strata, key=str)):
        assignments.update(_assign(strata[key], checked, _stratum_rng(seed, index)))
    return SplitAssignment(assignments=assignments, ratios=checked, seed=seed)


# --- class imbalance remedies -------------------------------------------------


def undersample_majority(
    records: Sequence,
    positive_label_key: Callable,
    n_majority: int,
    seed: int = 0,
) -> list:
    """Keep every minority-class record and a seeded sample of the majority.

    ``positive_label_key`` maps a record to a truthy (positive) or falsy
    (negative) label; records where it returns None are dropped. The
    majority class is whichever label is more frequent (ties go to the
    negatives). Exactly ``n_majority`` majority records are sampled
    without replacement; input order is preserved in the output.
    """
    labeled = [(i, bool(positive_label_key(r))) for i, r in enumerate(records)
               if positive_label_key(r) is not None]
    pos = [i for i, lab in labeled if lab]
    neg = [i for i, lab in labeled if not lab]
    majority, minority = (pos, neg) if len(pos) > len(neg) else (neg, pos)
    if n_majority > len(majority):
        raise NotEnoughMajority(
            f"requested {n_majority} majority records, only {len(majority)} available"
        )
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(np.array(majority), size=n_majority, replace=False).tolist())
    keep = chosen.union(minority)
    return [records[i] for i in range(len(records)) if i in keep]


@dataclass(frozen=True)
class ClassWeights:
    """Per-class loss weights, inversely proportional to class frequency."""

    weights: Mapping[Hashable, float]

    def __getitem__(self, label: Hashable) -> float:
        return self.weights[label]

    def __len__(self) -> int:
        return len(self.weights)

    def items(self):
        return self.weights.items()


def class_weights(labels: Iterable[Hashable],
                  classes: Sequence[Hashable] | None = None) -> ClassWeights:
    """Weights ``w_c = N / (K * n_c)`` over ``K`` classes of sizes ``n_c``.

    The weighted example mass is preserved: ``sum_c w_c * n_c == N``.

    Raises:
        EmptyClass: no labels at all, or an explicitly requested class
            has zero examples.
    """
    counts = Counter(labels)
    if classes is None:
        classes = sorted(counts, key=str)
    if not classes:
        raise EmptyClass("no labels given")
    missing = [c for c in classes if counts.get(c, 0) == 0]
    if missing:
        raise EmptyClass(f"classes with zero examples: {missing}")
    total = sum(counts[c] for c in classes)
    k = len(classes)
    return ClassWeights({c: total / (k * counts[c]) for c in classes})

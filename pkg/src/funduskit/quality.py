"""Quality gating: score thresholding, both-eyes filtering, and the
left/right quality-rate independence test.

File formats: scores travel as ``participant_id,eye,score`` and gate
decisions as ``participant_id,eye,label`` CSVs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import chi2 as _chi2_dist

from .dataset import ParticipantRecord
from .exceptions import DegenerateTable, MissingQualityScores, SchemaError

EYES = ("L", "R")
GOOD, BAD = "good", "bad"

__all__ = [
    "EYES",
    "GOOD",
    "BAD",
    "QualityScore",
    "ContingencyTable2x2",
    "ChiSquareResult",
    "apply_threshold",
    "filter_both_eyes_good",
    "chi_square_independence",
    "read_scores",
    "write_scores",
    "read_labels",
    "write_labels",
]


@dataclass(frozen=True)
class QualityScore:
    """Model-assigned probability that one eye's image is usable."""

    participant_id: str
    eye: str
    score: float

    def __post_init__(self):
        if self.eye not in EYES:
            raise ValueError(f"eye must be one of {EYES}, got {self.eye!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


def apply_threshold(
    scores: Iterable[QualityScore], tau: float = 0.5
) -> dict[tuple[str, str], str]:
    """Label each (participant, eye) good when ``score >= tau``, else bad.

    The tie at exactly ``tau`` counts as good.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    return {
        (s.participant_id, s.eye): (GOOD if s.score >= tau else BAD)
        for s in scores
    }


def filter_both_eyes_good(
    records: Sequence[ParticipantRecord],
    labels: Mapping[tuple[str, str], str],
) -> list[ParticipantRecord]:
    """Keep participants with both eye images present and both labeled good.

    Raises:
        MissingQualityScores: some image present in the records has no
            label; the gaps are listed in the message.
    """
    gaps = [
        (r.participant_id, eye)
        for r in records
        for eye in EYES
        if r.image_for(eye) is not None and (r.participant_id, eye) not in labels
    ]
    if gaps:
        raise MissingQualityScores(
            f"{len(gaps)} image(s) lack quality labels, e.g. {gaps[:5]}"
        )
    return [
        r for r in records
        if r.left_image is not None and r.right_image is not None
        and labels[(r.participant_id, "L")] == GOOD
        and labels[(r.participant_id, "R")] == GOOD
    ]


@dataclass(frozen=True)
class ContingencyTable2x2:
    """Counts with rows = eye side (L, R) and columns = (good, bad)."""

    a: int  # L good
    b: int  # L bad
    c: int  # R good
    d: int  # R bad

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("counts must be non-negative")
        if self.total == 0:
            raise ValueError("table must contain at least one observation")

    @property
    def total(self) -> int:
        return self.a + self.b + self.c + self.d

    @classmethod
    def from_labels(cls, labels: Mapping[tuple[str, str], str]) -> "ContingencyTable2x2":
        counts = {("L", GOOD): 0, ("L", BAD): 0, ("R", GOOD): 0, ("R", BAD): 0}
        for (_, eye), label in labels.items():
            counts[(eye, label)] += 1
        return cls(a=counts[("L", GOOD)], b=counts[("L", BAD)],
                   c=counts[("R", GOOD)], d=counts[("R", BAD)])


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    p_value: float
    dof: int = 1


def chi_square_independence(table: ContingencyTable2x2) -> ChiSquareResult:
    """Pearson chi-square test of independence, no continuity correction.

    The statistic is ``sum((O - E)^2 / E)`` over the four cells, with
    expected counts from the row/column marginals; p comes from the
    chi-square survival function with one degree of freedom.

    Raises:
        DegenerateTable: a zero row or column marginal makes every
            expected count on that margin zero.
    """
    observed = np.array([[table.a, table.b], [table.c, table.d]], dtype=np.float64)
    row_sums = observed.sum(axis=1)
    col_sums = observed.sum(axis=0)
    if np.any(row_sums == 0) or np.any(col_sums == 0):
        raise DegenerateTable(f"zero marginal in table {table}")
    expected = np.outer(row_sums, col_sums) / observed.sum()
    statistic = float(((observed - expected) ** 2 / expected).sum())
    p_value = float(_chi2_dist.sf(statistic, df=1))
    return ChiSquareResult(statistic=statistic, p_value=p_value, dof=1)


# --- file formats -------------------------------------------------------------


def write_scores(path: str | Path, scores: Iterable[QualityScore]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "eye", "score"])
        for s in scores:
            writer.writerow([s.participant_id, s.eye, repr(s.score)])


def read_scores(path: str | Path) -> list[QualityScore]:
    scores: list[QualityScore] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["participant_id", "eye", "score"]:
            raise SchemaError(f"{path}: expected header participant_id,eye,score")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                scores.append(QualityScore(row[0].strip(), row[1].strip(), float(row[2])))
            except (IndexError, ValueError) as err:
                raise SchemaError(f"{path}:{line_no}: bad score row {row}: {err}") from None
    return scores


def write_labels(path: str | Path, labels: Mapping[tuple[str, str], str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["participant_id", "eye", "label"])
        for pid, eye in sorted(labels):
            writer.writerow([pid, eye, labels[(pid, eye)]])


def read_labels(path: str | Path) -> dict[tuple[str, str], str]:
    labels: dict[tuple[str, str], str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["participant_id", "eye", "label"]:
            raise SchemaError(f"{path}: expected header participant_id,eye,label")
        for row in reader:
            if not row:
                continue
            label = row[2].strip()
            if label not in (GOOD, BAD):
                raise SchemaError(f"{path}: unknown label {label!r}")
            labels[(row[0].strip(), row[1].strip())] = label
    return labels

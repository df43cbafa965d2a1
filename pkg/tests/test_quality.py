import numpy as np
import pytest

from funduskit.dataset import ParticipantRecord
from funduskit.exceptions import DegenerateTable, MissingQualityScores
from funduskit.quality import (
    ContingencyTable2x2,
    QualityScore,
    apply_threshold,
    chi_square_independence,
    filter_both_eyes_good,
    read_labels,
    read_scores,
    write_labels,
    write_scores,
)

from oracles import oracle_chi2_2x2


def record(pid, left="l.png", right="r.png"):
    return ParticipantRecord(participant_id=pid, left_image=left, right_image=right)


class TestApplyThreshold:
    def test_basic_cases(self):
        labels = apply_threshold([
            QualityScore("p1", "L", 0.7),
            QualityScore("p1", "R", 0.3),
            QualityScore("p2", "L", 0.5),
        ])
        assert labels[("p1", "L")] == "good"
        assert labels[("p1", "R")] == "bad"
        assert labels[("p2", "L")] == "good"  # tie goes to good

    def test_tau_validation(self):
        with pytest.raises(ValueError):
            apply_threshold([], tau=0.0)

    def test_score_validation(self):
        with pytest.raises(ValueError):
            QualityScore("p", "L", 1.2)
        with pytest.raises(ValueError):
            QualityScore("p", "X", 0.5)


class TestFilterBothEyesGood:
    LABELS = {
        ("p1", "L"): "good", ("p1", "R"): "good",
        ("p2", "L"): "good", ("p2", "R"): "bad",
        ("p3", "L"): "good",
    }

    def test_both_good_kept(self):
        assert filter_both_eyes_good([record("p1")], self.LABELS) == [record("p1")]

    def test_one_bad_dropped(self):
        assert filter_both_eyes_good([record("p2")], self.LABELS) == []

    def test_absent_eye_dropped(self):
        assert filter_both_eyes_good([record("p3", right=None)], self.LABELS) == []

    def test_missing_label_raises(self):
        with pytest.raises(MissingQualityScores):
            filter_both_eyes_good([record("p9")], self.LABELS)

    def test_kept_count_bounded(self):
        rng = np.random.default_rng(0)
        records = [record(f"p{i}") for i in range(300)]
        labels = {}
        for r in records:
            for eye in ("L", "R"):
                labels[(r.participant_id, eye)] = "good" if rng.uniform() < 0.6 else "bad"
        kept = filter_both_eyes_good(records, labels)
        left_good = sum(1 for (pid, eye), v in labels.items() if eye == "L" and v == "good")
        right_good = sum(1 for (pid, eye), v in labels.items() if eye == "R" and v == "good")
        assert len(kept) <= min(left_good, right_good)

    def test_kept_fraction_tracks_product_of_rates(self):
        # Independent per-eye labels: kept share converges to pL * pR.
        rng = np.random.default_rng(1)
        n = 20_000
        p_left, p_right = 0.5362, 0.5837
        records = [record(f"p{i}") for i in range(n)]
        labels = {}
        for r in records:
            labels[(r.participant_id, "L")] = "good" if rng.uniform() < p_left else "bad"
            labels[(r.participant_id, "R")] = "good" if rng.uniform() < p_right else "bad"
        kept = len(filter_both_eyes_good(records, labels)) / n
        expected = p_left * p_right
        sigma = (expected * (1 - expected) / n) ** 0.5
        assert abs(kept - expected) < 4 * sigma


class TestChiSquare:
    def test_perfect_independence(self):
        result = chi_square_independence(ContingencyTable2x2(10, 10, 10, 10))
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1.0)
        assert result.dof == 1

    def test_hand_computed_example(self):
        result = chi_square_independence(ContingencyTable2x2(20, 10, 10, 20))
        assert result.statistic == pytest.approx(oracle_chi2_2x2(20, 10, 10, 20), abs=1e-12)
        assert result.statistic == pytest.approx(6.6667, abs=1e-4)

    def test_reported_quality_counts(self):
        # 67,120 left and right images; good counts 35,991 and 39,179.
        a, b = 35_991, 67_120 - 35_991
        c, d = 39_179, 67_120 - 39_179
        result = chi_square_independence(ContingencyTable2x2(a, b, c, d))
        assert result.statistic == pytest.approx(oracle_chi2_2x2(a, b, c, d), abs=1e-6)
        assert result.statistic == pytest.approx(307.3, abs=0.1)
        assert result.p_value < 0.05

    def test_row_and_column_swap_invariance(self):
        base = chi_square_independence(ContingencyTable2x2(12, 7, 5, 21)).statistic
        rows = chi_square_independence(ContingencyTable2x2(5, 21, 12, 7)).statistic
        cols = chi_square_independence(ContingencyTable2x2(7, 12, 21, 5)).statistic
        assert base == pytest.approx(rows) == pytest.approx(cols)

    def test_doubling_counts_doubles_statistic(self):
        base = chi_square_independence(ContingencyTable2x2(12, 7, 5, 21)).statistic
        doubled = chi_square_independence(ContingencyTable2x2(24, 14, 10, 42)).statistic
        assert doubled == pytest.approx(2 * base)

    def test_degenerate_marginal(self):
        with pytest.raises(DegenerateTable):
            chi_square_independence(ContingencyTable2x2(0, 0, 10, 10))
        with pytest.raises(DegenerateTable):
            chi_square_independence(ContingencyTable2x2(10, 0, 10, 0))

    def test_from_labels(self):
        table = ContingencyTable2x2.from_labels({
            ("p1", "L"): "good", ("p1", "R"): "bad",
            ("p2", "L"): "bad", ("p2", "R"): "bad",
        })
        assert (table.a, table.b, table.c, table.d) == (1, 1, 0, 2)


class TestScoreFiles:
    def test_scores_roundtrip(self, tmp_path):
        scores = [QualityScore("p1", "L", 0.125), QualityScore("p1", "R", 0.875)]
        path = tmp_path / "scores.csv"
        write_scores(path, scores)
        assert read_scores(path) == scores

    def test_labels_roundtrip(self, tmp_path):
        labels = {("p1", "L"): "good", ("p1", "R"): "bad"}
        path = tmp_path / "labels.csv"
        write_labels(path, labels)
        assert read_labels(path) == labels

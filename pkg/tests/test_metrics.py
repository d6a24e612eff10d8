from __future__ import annotations

import random
from fractions import Fraction

import pytest

from facteval.metrics import (
    COMMON_EXCEEDS_CORRECT,
    COMMON_EXCEEDS_MIN,
    CORRECT_EXCEEDS_GENERATED,
    NEGATIVE_COUNT,
    CellAggregate,
    DerivedMetrics,
    InvalidCountsError,
    RawCounts,
    aggregate_cell,
    aggregate_row,
    coherence_value,
    derive_metrics,
    f_score,
    round_half_away,
    validate_counts,
)


def random_valid_counts(rng: random.Random) -> RawCounts:
    r = rng.randrange(0, 12)
    g = rng.randrange(0, 12)
    common = rng.randrange(0, min(r, g) + 1)
    correct = rng.randrange(common, g + 1)
    return RawCounts(r, g, common, correct)


class TestValidateCounts:
    def test_valid_counts_pass(self):
        assert validate_counts(RawCounts(5, 4, 3, 4)) == []

    def test_common_above_min(self):
        assert COMMON_EXCEEDS_MIN in validate_counts(RawCounts(5, 4, 5, 4))

    def test_common_above_correct(self):
        assert validate_counts(RawCounts(5, 4, 3, 2)) == [COMMON_EXCEEDS_CORRECT]

    def test_correct_above_generated(self):
        assert CORRECT_EXCEEDS_GENERATED in validate_counts(RawCounts(5, 4, 3, 6))

    def test_negative(self):
        assert NEGATIVE_COUNT in validate_counts(RawCounts(-1, 4, 0, 0))

    def test_random_valid_counts_always_pass(self):
        rng = random.Random(404)
        for _ in range(300):
            assert validate_counts(random_valid_counts(rng)) == []


class TestDeriveMetrics:
    def test_hand_computed_example(self):
        m = derive_metrics(RawCounts(4, 5, 3, 5))
        assert m.precision == pytest.approx(0.6, abs=1e-12)
        assert m.recall == pytest.approx(0.75, abs=1e-12)
        assert m.f_score == pytest.approx(2 / 3, abs=1e-12)
        assert m.accuracy == pytest.approx(1.0, abs=1e-12)

    def test_perfect_output(self):
        m = derive_metrics(RawCounts(5, 5, 5, 5))
        assert (m.precision, m.recall, m.f_score, m.accuracy) == (1.0, 1.0, 1.0, 1.0)

    def test_disjoint_but_correct(self):
        m = derive_metrics(RawCounts(5, 3, 0, 3))
        assert (m.precision, m.recall, m.f_score, m.accuracy) == (0.0, 0.0, 0.0, 1.0)

    def test_zero_generated_leaves_precision_accuracy_undefined(self):
        m = derive_metrics(RawCounts(4, 0, 0, 0))
        assert m.precision is None
        assert m.accuracy is None
        assert m.recall == 0.0
        assert m.f_score is None

    def test_zero_reference_leaves_recall_undefined(self):
        m = derive_metrics(RawCounts(0, 4, 0, 2))
        assert m.recall is None
        assert m.f_score is None
        assert m.precision == 0.0
        assert m.accuracy == 0.5

    def test_invalid_counts_rejected(self):
        with pytest.raises(InvalidCountsError) as exc:
            derive_metrics(RawCounts(5, 4, 5, 4))
        assert COMMON_EXCEEDS_MIN in exc.value.violations

    def test_waiver_covers_only_common_vs_correct(self):
        assert derive_metrics(RawCounts(5, 4, 3, 2), waiver=True).precision == 0.75
        with pytest.raises(InvalidCountsError):
            derive_metrics(RawCounts(5, 4, 5, 4), waiver=True)

    def test_all_metrics_in_unit_interval_and_f_between_p_and_r(self):
        rng = random.Random(99)
        checked = 0
        for _ in range(500):
            counts = random_valid_counts(rng)
            if counts.g_facts == 0 or counts.r_facts == 0:
                continue
            m = derive_metrics(counts)
            for value in (m.precision, m.recall, m.f_score, m.accuracy):
                assert 0.0 <= value <= 1.0
            assert min(m.precision, m.recall) - 1e-12 <= m.f_score <= max(m.precision, m.recall) + 1e-12
            assert m.accuracy >= m.precision - 1e-12
            checked += 1
        assert checked > 300


class TestCoherence:
    @pytest.mark.parametrize(
        "label,value",
        [("coherent", 1.0), ("minor_errors", 0.5), ("major_errors", 0.0)],
    )
    def test_fixed_mapping(self, label, value):
        assert coherence_value(label) == value

    def test_unknown_label(self):
        with pytest.raises(ValueError):
            coherence_value("fluent")


class TestAggregateCell:
    def test_mean_of_two(self):
        per_task = [
            (DerivedMetrics(0.5, 0.5, 0.5, 1.0), "coherent"),
            (DerivedMetrics(0.7, 0.5, 0.58, 1.0), "coherent"),
        ]
        cell = aggregate_cell(per_task)
        assert cell.means["precision"] == pytest.approx(0.6)
        assert cell.n_tasks == 2
        assert cell.n_excluded["precision"] == 0

    def test_f_mean_is_macro_over_tasks(self):
        # 3 tasks with P=R=F=1 plus 7 tasks with P=1/2, R=1, F=2/3:
        # mean F = 23/30, not f_score(mean P, mean R) = 0.7878...
        per_task = [(derive_metrics(RawCounts(4, 4, 4, 4)), "coherent")] * 3
        per_task += [(derive_metrics(RawCounts(3, 6, 3, 6)), "coherent")] * 7
        cell = aggregate_cell(per_task)
        assert cell.means["precision"] == pytest.approx(0.65, abs=1e-12)
        assert cell.means["recall"] == pytest.approx(1.0, abs=1e-12)
        assert cell.means["f_score"] == pytest.approx(23 / 30, abs=1e-12)
        assert round_half_away(cell.means["f_score"]) == 0.77
        assert f_score(0.65, 1.0) == pytest.approx(0.7878787878, abs=1e-9)

    def test_undefined_tasks_excluded_and_counted(self):
        per_task = [
            (derive_metrics(RawCounts(4, 4, 2, 4)), "coherent"),
            (derive_metrics(RawCounts(4, 0, 0, 0)), "coherent"),
            (derive_metrics(RawCounts(4, 4, 3, 4)), "coherent"),
        ]
        cell = aggregate_cell(per_task)
        assert cell.means["precision"] == pytest.approx((0.5 + 0.75) / 2)
        assert cell.n_excluded["precision"] == 1
        assert cell.n_excluded["recall"] == 0
        assert cell.n_tasks == 3

    def test_metric_with_no_defined_tasks_is_undefined(self):
        per_task = [(derive_metrics(RawCounts(4, 0, 0, 0)), "coherent")]
        cell = aggregate_cell(per_task)
        assert cell.means["precision"] is None
        assert cell.n_excluded["precision"] == 1

    def test_permutation_invariant(self):
        rng = random.Random(3)
        per_task = [
            (derive_metrics(c), "coherent")
            for c in (random_valid_counts(rng) for _ in range(8))
        ]
        shuffled = list(per_task)
        rng.shuffle(shuffled)
        assert aggregate_cell(per_task).means == aggregate_cell(shuffled).means

    def test_coherence_mean_all_coherent(self):
        per_task = [(DerivedMetrics(1, 1, 1, 1), "coherent")] * 4
        assert aggregate_cell(per_task).means["coherence"] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_cell([])


class TestAggregateRow:
    def _cell(self, means, model="m", evaluator="e"):
        base = {"precision": None, "recall": None, "f_score": None, "accuracy": None, "coherence": None}
        base.update(means)
        return CellAggregate(model, evaluator, 10, base, {})

    def test_avg_column_rounding(self):
        cells = [self._cell({"precision": p}, evaluator=f"e{i}") for i, p in enumerate((0.42, 0.43, 0.46))]
        row = aggregate_row(cells)
        assert row["precision"] == pytest.approx(1.31 / 3)
        assert round_half_away(row["precision"]) == 0.44

    def test_recall_avg(self):
        cells = [self._cell({"recall": r}, evaluator=f"e{i}") for i, r in enumerate((0.64, 0.60, 0.73))]
        assert round_half_away(aggregate_row(cells)["recall"]) == 0.66

    def test_identical_cells(self):
        cells = [self._cell({"accuracy": 1.0}, evaluator=f"e{i}") for i in range(3)]
        assert aggregate_row(cells)["accuracy"] == 1.0

    def test_undefined_cells_skipped(self):
        cells = [
            self._cell({"precision": 0.5}, evaluator="e1"),
            self._cell({"precision": None}, evaluator="e2"),
        ]
        assert aggregate_row(cells)["precision"] == 0.5

    def test_mixed_models_rejected(self):
        with pytest.raises(ValueError):
            aggregate_row([self._cell({}, model="a"), self._cell({}, model="b")])


class TestFScoreConcavity:
    def test_mean_f_never_exceeds_f_of_means(self):
        rng = random.Random(1234)
        for _ in range(300):
            tasks = []
            for _ in range(rng.randrange(2, 12)):
                r = rng.randrange(1, 12)
                g = rng.randrange(1, 12)
                common = rng.randrange(0, min(r, g) + 1)
                tasks.append(derive_metrics(RawCounts(r, g, common, g)))
            mean_p = sum(t.precision for t in tasks) / len(tasks)
            mean_r = sum(t.recall for t in tasks) / len(tasks)
            mean_f = sum(t.f_score for t in tasks) / len(tasks)
            assert mean_f <= f_score(mean_p, mean_r) + 1e-12


class TestRounding:
    @pytest.mark.parametrize(
        "value,expected",
        [
            (0.43666666, 0.44),
            (0.65666666, 0.66),
            (0.485, 0.49),  # half rounds away from zero, not to even
            (0.125, 0.13),
            (-0.125, -0.13),
            (0.47666666, 0.48),
            (1.0, 1.0),
        ],
    )
    def test_half_away_from_zero(self, value, expected):
        assert round_half_away(value) == expected

    def test_exact_fraction_means(self):
        # internal values stay full precision; rounding only at display
        mean = float(Fraction(131, 300))
        assert round_half_away(mean) == 0.44

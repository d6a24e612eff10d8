"""Raw fact counts, count validation, and the derived per-task quality metrics.

An evaluator's judgment of one (task, system) cell is four integers:
facts in the reference (R), facts in the generated description (G), facts
the two share (R&G), and facts in the generated description that are
correct against the full clinical report (C). Everything downstream
(precision, recall, f-score, accuracy, and their table aggregates) is a
pure function of those counts plus a three-level coherence label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

COHERENCE_VALUES: dict[str, float] = {
    "coherent": 1.0,
    "minor_errors": 0.5,
    "major_errors": 0.0,
}
COHERENCE_LABELS = tuple(COHERENCE_VALUES)

METRIC_NAMES = ("precision", "recall", "f_score", "accuracy")
CELL_METRIC_NAMES = METRIC_NAMES + ("coherence",)

# Stable identifiers for count-invariant violations; these names travel
# through API error payloads and import diagnostics.
NEGATIVE_COUNT = "negative_count"
COMMON_EXCEEDS_MIN = "common_exceeds_min_r_g"
CORRECT_EXCEEDS_GENERATED = "correct_exceeds_generated"
COMMON_EXCEEDS_CORRECT = "common_exceeds_correct"

#: Violations an evaluator may explicitly waive on a per-record basis.
WAIVABLE_VIOLATIONS = frozenset({COMMON_EXCEEDS_CORRECT})


class InvalidCountsError(ValueError):
    """Raised when raw counts break a non-waived invariant."""

    def __init__(self, violations: Sequence[str]):
        self.violations = list(violations)
        super().__init__("invalid raw counts: " + ", ".join(self.violations))


@dataclass(frozen=True)
class RawCounts:
    r_facts: int
    g_facts: int
    common_facts: int
    correct_facts: int


def validate_counts(counts: RawCounts) -> list[str]:
    """Return the name of every violated count invariant (empty when valid).

    Violations are data, not faults: callers decide whether to reject,
    waive, or report them.
    """
    violations = []
    fields = (counts.r_facts, counts.g_facts, counts.common_facts, counts.correct_facts)
    if any(v < 0 for v in fields):
        violations.append(NEGATIVE_COUNT)
    if counts.common_facts > min(counts.r_facts, counts.g_facts):
        violations.append(COMMON_EXCEEDS_MIN)
    if counts.correct_facts > counts.g_facts:
        violations.append(CORRECT_EXCEEDS_GENERATED)
    if counts.common_facts > counts.correct_facts:
        violations.append(COMMON_EXCEEDS_CORRECT)
    return violations


def check_counts(counts: RawCounts, waiver: bool = False) -> None:
    """Raise InvalidCountsError on any violation not covered by the waiver."""
    violations = validate_counts(counts)
    if waiver:
        violations = [v for v in violations if v not in WAIVABLE_VIOLATIONS]
    if violations:
        raise InvalidCountsError(violations)


def coherence_value(label: str) -> float:
    """Map a coherence label to its fixed numeric value (1.0 / 0.5 / 0.0)."""
    try:
        return COHERENCE_VALUES[label]
    except KeyError:
        raise ValueError(f"unknown coherence label: {label!r}") from None


@dataclass(frozen=True)
class DerivedMetrics:
    """Per-task metrics; None marks a value whose denominator was zero."""

    precision: float | None
    recall: float | None
    f_score: float | None
    accuracy: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def f_score(precision: float, recall: float) -> float:
    """Harmonic combination of precision and recall, 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def derive_metrics(counts: RawCounts, waiver: bool = False) -> DerivedMetrics:
    """Compute precision, recall, f-score, accuracy from one task's counts.

    precision = common/G and accuracy = correct/G are undefined when G = 0;
    recall = common/R is undefined when R = 0; f-score is undefined when
    either factor is. Undefined values are carried as None, never coerced.
    """
    check_counts(counts, waiver=waiver)
    g, r = counts.g_facts, counts.r_facts
    precision = counts.common_facts / g if g > 0 else None
    recall = counts.common_facts / r if r > 0 else None
    f = f_score(precision, recall) if precision is not None and recall is not None else None
    accuracy = counts.correct_facts / g if g > 0 else None
    return DerivedMetrics(precision, recall, f, accuracy)


@dataclass(frozen=True)
class CellAggregate:
    """One evaluator x model table cell: per-metric means over its tasks."""

    model_id: str
    evaluator_id: str
    n_tasks: int
    means: dict[str, float | None]
    n_excluded: dict[str, int]


def _mean(values: Sequence[float]) -> float | None:
    if not values:
        return None
    # fsum: exactly-rounded, so means are permutation invariant
    return math.fsum(values) / len(values)


def aggregate_cell(
    per_task: Sequence[tuple[DerivedMetrics, str]],
    model_id: str = "",
    evaluator_id: str = "",
) -> CellAggregate:
    """Aggregate (DerivedMetrics, coherence label) pairs for one cell.

    Means are taken per metric over the tasks where that metric is defined
    (macro over tasks); undefined tasks are excluded and counted, so the
    f-score mean is the mean of per-task f-scores, not f of the means.
    """
    if not per_task:
        raise ValueError("cannot aggregate an empty task list")
    means: dict[str, float | None] = {}
    excluded: dict[str, int] = {}
    for name in METRIC_NAMES:
        defined = [getattr(m, name) for m, _ in per_task if getattr(m, name) is not None]
        means[name] = _mean(defined)
        excluded[name] = len(per_task) - len(defined)
    means["coherence"] = _mean([coherence_value(label) for _, label in per_task])
    excluded["coherence"] = 0
    return CellAggregate(model_id, evaluator_id, len(per_task), means, excluded)


def aggregate_row(cells: Sequence[CellAggregate]) -> dict[str, float | None]:
    """Unweighted mean across evaluator cells of each defined cell mean.

    This is the Avg column: it averages the already-aggregated cell means,
    skipping cells where a metric is undefined.
    """
    models = {c.model_id for c in cells if c.model_id}
    if len(models) > 1:
        raise ValueError(f"cells span multiple models: {sorted(models)}")
    row: dict[str, float | None] = {}
    for name in CELL_METRIC_NAMES:
        defined = [c.means[name] for c in cells if c.means[name] is not None]
        row[name] = _mean(defined)
    return row


def round_half_away(value: float, places: int = 2) -> float:
    """Round half away from zero; the display rule for all rendered tables.

    Internal values keep full precision; rounding happens only at report
    rendering time.
    """
    quantum = Decimal(1).scaleb(-places)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))


def mean_of(values: Iterable[float]) -> float:
    """Arithmetic mean of a non-empty iterable."""
    items = list(values)
    if not items:
        raise ValueError("mean of empty sequence")
    return math.fsum(items) / len(items)

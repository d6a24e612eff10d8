"""Inter-annotator agreement: Krippendorff's alpha and coherence diagnostics.

Alpha is computed from a coincidence matrix. Each unit with m >= 2 ratings
contributes every ordered pair of distinct-rater values with weight
1/(m - 1); with value margins n_c over the matrix,

    D_o = sum_ck o_ck d2(c, k) / n
    D_e = sum_ck n_c n_k d2(c, k) / (n (n - 1))
    alpha = 1 - D_o / D_e

where d2 is (c - k)^2 for interval data and [c != k] for nominal data.
Values are held as exact rationals so that equal quotients from different
raw counts (2/4 and 1/2) coincide in the margins.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from numbers import Rational
from typing import Hashable, Sequence

from .metrics import COHERENCE_LABELS, COHERENCE_VALUES
from .tasks import AnnotationRecord

INTERVAL = "interval"
NOMINAL = "nominal"

RAW_QUANTITIES = ("r_facts", "g_facts", "common_facts", "correct_facts", "coherence")
DERIVED_QUANTITIES = ("precision", "recall", "f_score", "accuracy")
ALL_QUANTITIES = RAW_QUANTITIES + DERIVED_QUANTITIES

COHERENCE_FRACTIONS = {
    "coherent": Fraction(1),
    "minor_errors": Fraction(1, 2),
    "major_errors": Fraction(0),
}


class AgreementError(ValueError):
    """No pairable data, unknown metric, or malformed reliability input."""


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    d_observed: float
    d_expected: float
    n_pairable: int
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "d_observed": self.d_observed,
            "d_expected": self.d_expected,
            "n_pairable": self.n_pairable,
            "degenerate": self.degenerate,
        }


@dataclass
class ReliabilityData:
    """Raters x units value matrix; any (rater, unit) entry may be missing."""

    raters: list[str]
    units: list[Hashable]
    values: dict[tuple[str, Hashable], Hashable] = field(default_factory=dict)

    def __post_init__(self):
        self._rater_set = set(self.raters)
        self._unit_set = set(self.units)

    def add(self, rater: str, unit: Hashable, value) -> None:
        if rater not in self._rater_set:
            raise AgreementError(f"undeclared rater: {rater!r}")
        if unit not in self._unit_set:
            raise AgreementError(f"undeclared unit: {unit!r}")
        if value is None:
            raise AgreementError("missing ratings are absent entries, not None values")
        self.values[(rater, unit)] = _canonical_value(value)

    def unit_values(self) -> dict[Hashable, list]:
        per_unit: dict[Hashable, list] = {u: [] for u in self.units}
        for rater in self.raters:
            for unit in self.units:
                value = self.values.get((rater, unit))
                if value is not None:
                    per_unit[unit].append(value)
        return per_unit

    def restrict(self, raters: Sequence[str]) -> "ReliabilityData":
        keep = set(raters)
        restricted = ReliabilityData(raters=[r for r in self.raters if r in keep], units=list(self.units))
        restricted.values = {
            (rater, unit): value for (rater, unit), value in self.values.items() if rater in keep
        }
        return restricted


def _canonical_value(value):
    """Exact-rational canonical form; non-numeric values pass through for nominal use."""
    if isinstance(value, bool):
        raise AgreementError(f"boolean rating: {value!r}")
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    return value


def _interval_d2(c, k) -> Fraction:
    return (c - k) ** 2


def _nominal_d2(c, k) -> Fraction:
    return Fraction(0) if c == k else Fraction(1)


def krippendorff_alpha(data: ReliabilityData, metric: str = INTERVAL) -> AlphaResult:
    """Alpha over all units with at least two ratings.

    All arithmetic is exact; only the final quantities are converted to
    float. When every pairable value is identical, D_e is zero and alpha is
    reported as 1.0 with the degenerate flag set.
    """
    if metric == INTERVAL:
        d2 = _interval_d2
    elif metric == NOMINAL:
        d2 = _nominal_d2
    else:
        raise AgreementError(f"unknown metric: {metric!r} (use {INTERVAL!r} or {NOMINAL!r})")

    pairable = {u: vs for u, vs in data.unit_values().items() if len(vs) >= 2}
    if not pairable:
        raise AgreementError("no unit has two or more ratings")

    coincidence: dict[tuple, Fraction] = defaultdict(Fraction)
    n = 0
    for values in pairable.values():
        m = len(values)
        n += m
        weight = Fraction(1, m - 1)
        for i, c in enumerate(values):
            for j, k in enumerate(values):
                if i != j:
                    coincidence[(c, k)] += weight

    margins: dict = defaultdict(Fraction)
    for (c, _k), mass in coincidence.items():
        margins[c] += mass

    try:
        d_obs = sum((mass * d2(c, k) for (c, k), mass in coincidence.items()), Fraction(0)) / n
        d_exp = sum(
            (margins[c] * margins[k] * d2(c, k) for c in margins for k in margins if c != k),
            Fraction(0),
        ) / (n * (n - 1))
    except TypeError:
        raise AgreementError(f"non-numeric ratings require the {NOMINAL!r} metric") from None

    if d_exp == 0:
        return AlphaResult(alpha=1.0, d_observed=float(d_obs), d_expected=0.0,
                           n_pairable=n, degenerate=True)
    return AlphaResult(
        alpha=float(1 - d_obs / d_exp),
        d_observed=float(d_obs),
        d_expected=float(d_exp),
        n_pairable=n,
        degenerate=False,
    )


def pairwise_alpha(
    data: ReliabilityData, metric: str = INTERVAL
) -> dict[tuple[str, str], AlphaResult | None]:
    """Alpha on the restriction of the data to each unordered rater pair.

    A pair with no pairable unit maps to None (missing, not zero).
    """
    if len(data.raters) < 2:
        raise AgreementError("pairwise alpha needs at least two raters")
    results: dict[tuple[str, str], AlphaResult | None] = {}
    for pair in combinations(sorted(data.raters), 2):
        try:
            results[pair] = krippendorff_alpha(data.restrict(pair), metric)
        except AgreementError:
            results[pair] = None
    return results


def derived_fraction(record: AnnotationRecord, quantity: str) -> Fraction | None:
    """Exact-rational derived metric for one record; None when undefined."""
    c = record.counts
    if quantity == "precision":
        return Fraction(c.common_facts, c.g_facts) if c.g_facts > 0 else None
    if quantity == "recall":
        return Fraction(c.common_facts, c.r_facts) if c.r_facts > 0 else None
    if quantity == "accuracy":
        return Fraction(c.correct_facts, c.g_facts) if c.g_facts > 0 else None
    if quantity == "f_score":
        if c.g_facts == 0 or c.r_facts == 0:
            return None
        p = Fraction(c.common_facts, c.g_facts)
        r = Fraction(c.common_facts, c.r_facts)
        if p + r == 0:
            return Fraction(0)
        return 2 * p * r / (p + r)
    raise AgreementError(f"unknown derived quantity: {quantity!r}")


def reliability_from_records(
    records: Sequence[AnnotationRecord], quantity: str, coherence_numeric: bool = True
) -> ReliabilityData:
    """Build raters x (task, model) reliability data for one quantity.

    Raw count quantities use the integers as rated; coherence uses the
    mapped numeric values (or the labels themselves for nominal analysis);
    derived quantities are exact rationals, with undefined cells missing.
    """
    raters = sorted({r.evaluator_id for r in records})
    units = sorted({(r.task_id, r.model_id) for r in records})
    data = ReliabilityData(raters=raters, units=units)
    for record in records:
        unit = (record.task_id, record.model_id)
        if quantity in ("r_facts", "g_facts", "common_facts", "correct_facts"):
            value = getattr(record.counts, quantity)
        elif quantity == "coherence":
            value = COHERENCE_FRACTIONS[record.coherence] if coherence_numeric else record.coherence
        elif quantity in DERIVED_QUANTITIES:
            value = derived_fraction(record, quantity)
            if value is None:
                continue
        else:
            raise AgreementError(f"unknown quantity: {quantity!r}")
        data.add(record.evaluator_id, unit, value)
    return data


def agreement_report(
    records: Sequence[AnnotationRecord],
    metric: str = INTERVAL,
    coherence_numeric: bool = True,
) -> dict[str, dict]:
    """Alpha for every raw and derived quantity, overall and per rater pair."""
    if len({r.evaluator_id for r in records}) < 2:
        raise AgreementError("agreement needs records from at least two evaluators")
    report: dict[str, dict] = {}
    for quantity in ALL_QUANTITIES:
        quantity_metric = metric
        if quantity == "coherence" and not coherence_numeric:
            quantity_metric = NOMINAL
        data = reliability_from_records(records, quantity, coherence_numeric=coherence_numeric)
        report[quantity] = {
            "all": krippendorff_alpha(data, quantity_metric),
            "pairs": pairwise_alpha(data, quantity_metric),
        }
    return report


@dataclass(frozen=True)
class CoherenceDistribution:
    counts: dict[str, int]
    shares: dict[str, float]
    n_judgments: int
    n_units: int
    n_unanimous: int
    unanimity_rate: float


def coherence_distribution(records: Sequence[AnnotationRecord]) -> CoherenceDistribution:
    """Share of each coherence label plus the all-Coherent unanimity rate.

    Shares are over all judgments; the unanimity rate is the fraction of
    (task, model) units where every rater who rated the unit chose Coherent.
    """
    if not records:
        raise AgreementError("no coherence ratings")
    counts = Counter(r.coherence for r in records)
    total = len(records)
    by_unit: dict[tuple[str, str], list[str]] = defaultdict(list)
    for record in records:
        by_unit[(record.task_id, record.model_id)].append(record.coherence)
    unanimous = sum(1 for labels in by_unit.values() if all(l == "coherent" for l in labels))
    return CoherenceDistribution(
        counts={label: counts.get(label, 0) for label in COHERENCE_LABELS},
        shares={label: counts.get(label, 0) / total for label in COHERENCE_LABELS},
        n_judgments=total,
        n_units=len(by_unit),
        n_unanimous=unanimous,
        unanimity_rate=unanimous / len(by_unit),
    )

"""Acceptance suite: one test per exit criterion, each printing a PASS line.

Expected values were computed independently before implementation: exact
fractions for the coincidence-matrix golden fixture, hand arithmetic for
the metric fixtures, and a brute-force oracle for derived metrics.
"""

from __future__ import annotations

import json
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

from facteval.agreement import ReliabilityData, agreement_report, coherence_distribution, krippendorff_alpha
from facteval.cli import main as cli_main
from facteval.metrics import (
    CellAggregate,
    RawCounts,
    aggregate_cell,
    derive_metrics,
    aggregate_row,
    f_score,
    round_half_away,
)
from facteval.corpus import rouge_precision, ingest_corpus, filter_by_reference_length, corpus_stats
from facteval.service import AnnotationStore, create_app
from facteval.tasks import load_study, parse_record

from conftest import REPO_ROOT, SAMPLE_CORPUS, make_study, synth_wire_record, synth_wire_records
from test_agreement import (
    BASE_COUNTS,
    GOLDEN_ALPHA,
    GOLDEN_PAIRS,
    UNIT_COHERENCES,
    golden_data,
    pairwise_alpha,
    scaled_records,
)
from test_agreement import coherence_fixture_110_8_2

GOLDEN_DIR = Path(__file__).parent / "golden"


def ok(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


# ---------------------------------------------------------------- criterion 1


def metrics_oracle(counts: RawCounts):
    """Independent derivation with exact fractions, straight from the formulas
    P = R&G/G, R = R&G/R, F = 2PR/(P+R), Acc = C/G."""
    r, g, common, correct = counts.r_facts, counts.g_facts, counts.common_facts, counts.correct_facts
    p = Fraction(common, g) if g else None
    rec = Fraction(common, r) if r else None
    f = None
    if p is not None and rec is not None:
        f = Fraction(0) if p + rec == 0 else 2 * p * rec / (p + rec)
    acc = Fraction(correct, g) if g else None
    return p, rec, f, acc


def test_derived_metric_formulas_match_oracle():
    rng = random.Random(20210401)
    started = time.perf_counter()
    fixtures = []
    while len(fixtures) < 50:
        r = rng.randrange(0, 15)
        g = rng.randrange(0, 15)
        common = rng.randrange(0, min(r, g) + 1)
        correct = rng.randrange(common, g + 1)
        fixtures.append(RawCounts(r, g, common, correct))
    for counts in fixtures:
        expected = metrics_oracle(counts)
        actual = derive_metrics(counts)
        for want, got in zip(expected, (actual.precision, actual.recall, actual.f_score, actual.accuracy)):
            if want is None:
                assert got is None
            else:
                assert got == pytest.approx(float(want), abs=1e-12)
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"took {elapsed:.3f}s"
    ok("derived-metric formulas vs oracle (50 fixtures, <1s)")


# ---------------------------------------------------------------- criterion 2

# Reference study aggregates: per-evaluator cell means and the reported Avg
# column, 4 systems x 5 metrics x 3 evaluators.
REFERENCE_AGGREGATES = {
    "lead-3": {
        "precision": ((0.42, 0.43, 0.46), 0.44),
        "recall": ((0.64, 0.60, 0.73), 0.66),
        "f_score": ((0.49, 0.45, 0.51), 0.48),
        "accuracy": ((1.0, 1.0, 1.0), 1.0),
        "coherence": ((0.95, 0.95, 0.90), 0.93),
    },
    "bert-ext": {
        "precision": ((0.58, 0.48, 0.48), 0.51),
        "recall": ((0.62, 0.61, 0.60), 0.61),
        "f_score": ((0.59, 0.52, 0.51), 0.54),
        "accuracy": ((1.0, 1.0, 1.0), 1.0),
        "coherence": ((1.0, 0.95, 1.0), 0.98),
    },
    "pegasus-cnn": {
        "precision": ((0.29, 0.36, 0.31), 0.32),
        "recall": ((0.43, 0.50, 0.50), 0.47),  # reported Avg; see xfail below
        "f_score": ((0.34, 0.40, 0.36), 0.37),
        "accuracy": ((0.97, 0.97, 0.98), 0.97),
        "coherence": ((1.0, 1.0, 0.95), 0.98),
    },
    "bart-med": {
        "precision": ((0.65, 0.58, 0.55), 0.59),
        "recall": ((1.0, 0.96, 0.97), 0.98),
        "f_score": ((0.77, 0.70, 0.68), 0.72),
        "accuracy": ((1.0, 1.0, 1.0), 1.0),
        "coherence": ((1.0, 0.75, 0.95), 0.90),
    },
}


def avg_of(model: str, metric: str, values) -> float:
    blank = {name: None for name in ("precision", "recall", "f_score", "accuracy", "coherence")}
    cells = [
        CellAggregate(model, f"eval-{i + 1}", 10, {**blank, metric: value}, {})
        for i, value in enumerate(values)
    ]
    return round_half_away(aggregate_row(cells)[metric])


def test_avg_column_reproduction():
    checked = 0
    for model, metrics in REFERENCE_AGGREGATES.items():
        for metric, (values, reported_avg) in metrics.items():
            if (model, metric) == ("pegasus-cnn", "recall"):
                continue  # reported value not derivable from its inputs; see xfail
            assert avg_of(model, metric, values) == reported_avg, (model, metric)
            checked += 1
    assert checked == 19
    ok("Avg column reproduction (19 of 20 reference cells exact at 2 decimals)")


@pytest.mark.xfail(
    strict=True,
    reason="reported Avg 0.47 is unreachable: mean(0.43, 0.50, 0.50) = 0.4766... "
    "rounds to 0.48 under every half-rounding rule; the reported value must "
    "come from unrounded per-evaluator data that was never published",
)
def test_avg_column_reproduction_pegasus_recall():
    values, reported_avg = REFERENCE_AGGREGATES["pegasus-cnn"]["recall"]
    assert avg_of("pegasus-cnn", "recall", values) == reported_avg


def test_pegasus_recall_forced_value():
    values, _reported = REFERENCE_AGGREGATES["pegasus-cnn"]["recall"]
    assert avg_of("pegasus-cnn", "recall", values) == 0.48
    ok("Avg column: 20th cell mathematically forced to 0.48 (documented xfail)")


# ---------------------------------------------------------------- criterion 3


def test_aggregation_order():
    # 3 tasks with P=R=1 plus 7 with P=1/2, R=1: mean P = 0.65 exactly
    per_task = [(derive_metrics(RawCounts(4, 4, 4, 4)), "coherent")] * 3
    per_task += [(derive_metrics(RawCounts(3, 6, 3, 6)), "coherent")] * 7
    cell = aggregate_cell(per_task)
    assert cell.means["precision"] == pytest.approx(0.65, abs=1e-12)
    assert cell.means["recall"] == pytest.approx(1.0, abs=1e-12)
    assert cell.means["f_score"] <= 0.7879
    assert round_half_away(cell.means["f_score"]) == 0.77
    assert round_half_away(f_score(0.65, 1.0)) == 0.79  # the wrong order would print this

    rng = random.Random(65)
    for _ in range(1000):
        tasks = []
        for _ in range(rng.randrange(2, 12)):
            r = rng.randrange(1, 14)
            g = rng.randrange(1, 14)
            common = rng.randrange(0, min(r, g) + 1)
            tasks.append(derive_metrics(RawCounts(r, g, common, g)))
        mean_p = sum(t.precision for t in tasks) / len(tasks)
        mean_r = sum(t.recall for t in tasks) / len(tasks)
        mean_f = sum(t.f_score for t in tasks) / len(tasks)
        assert mean_f <= f_score(mean_p, mean_r) + 1e-12
    ok("aggregation order (macro-over-tasks F, concavity over 1000 task sets)")


# ---------------------------------------------------------------- criterion 4


def test_krippendorff_perfect_agreement():
    data = ReliabilityData(raters=["a", "b", "c"], units=list(range(5)))
    for rater in ("a", "b", "c"):
        for unit in range(5):
            data.add(rater, unit, 3)
    degenerate = krippendorff_alpha(data)
    assert degenerate.alpha == 1.0 and degenerate.degenerate

    varied = ReliabilityData(raters=["a", "b"], units=list(range(4)))
    for unit, value in enumerate((1, 2, 3, 4)):
        varied.add("a", unit, value)
        varied.add("b", unit, value)
    result = krippendorff_alpha(varied)
    assert result.alpha == 1.0 and not result.degenerate
    ok("krippendorff (a): perfect agreement = 1.0")


def test_krippendorff_golden_fixture():
    result = krippendorff_alpha(golden_data())
    assert result.alpha == pytest.approx(float(GOLDEN_ALPHA), abs=1e-9)
    pairs = pairwise_alpha(golden_data())
    for pair, expected in GOLDEN_PAIRS.items():
        assert pairs[pair].alpha == pytest.approx(float(expected), abs=1e-9)
    ok("krippendorff (b): hand-computed golden fixture to 1e-9")


def test_krippendorff_affine_invariance():
    rng = random.Random(500)
    checked = 0
    while checked < 500:
        n_units = rng.randrange(4, 10)
        rows = {
            f"r{i}": [
                rng.randrange(0, 9) if rng.random() > 0.2 else None
                for _ in range(n_units)
            ]
            for i in range(rng.randrange(2, 5))
        }
        data = ReliabilityData(raters=list(rows), units=list(range(n_units)))
        for rater, values in rows.items():
            for unit, value in enumerate(values):
                if value is not None:
                    data.add(rater, unit, value)
        try:
            base = krippendorff_alpha(data)
        except Exception:
            continue
        scale = rng.uniform(0.1, 5.0) * rng.choice([-1, 1])
        shift = rng.uniform(-20, 20)
        transformed = ReliabilityData(raters=list(rows), units=list(range(n_units)))
        for rater, values in rows.items():
            for unit, value in enumerate(values):
                if value is not None:
                    transformed.add(rater, unit, scale * value + shift)
        assert krippendorff_alpha(transformed).alpha == pytest.approx(base.alpha, abs=1e-9)
        checked += 1
    ok("krippendorff (c): affine invariance over 500 datasets at 1e-9")


def test_krippendorff_derived_vs_raw_divergence():
    records = scaled_records({"e1": 1, "e2": 2, "e3": 3}, BASE_COUNTS, UNIT_COHERENCES)
    report = agreement_report(records)
    for quantity in ("precision", "recall", "f_score", "accuracy"):
        assert report[quantity]["all"].alpha == 1.0
        assert not report[quantity]["all"].degenerate
    for quantity in ("r_facts", "g_facts", "common_facts", "correct_facts"):
        assert report[quantity]["all"].alpha < 1.0
    ok("krippendorff (d): derived alpha 1.0 with raw-count alpha < 1.0")


# ---------------------------------------------------------------- criterion 5


def test_coherence_diagnostics():
    records = coherence_fixture_110_8_2()
    dist = coherence_distribution(records)
    assert dist.n_judgments == 120 and dist.n_units == 40
    assert round_half_away(dist.shares["coherent"] * 100) == 91.67
    assert round_half_away(dist.shares["minor_errors"] * 100) == 6.67
    assert round_half_away(dist.shares["major_errors"] * 100) == 1.67
    assert round_half_away(dist.unanimity_rate * 100) == 82.50
    ok("coherence diagnostics: 91.67/6.67/1.67 shares, 82.5% unanimity")


# ---------------------------------------------------------------- criterion 6


def test_rouge_properties():
    text = "He presents today for follow up of chronic conditions."
    assert rouge_precision(text, text) == (1.0, 1.0)
    assert rouge_precision("a b c", "a x b y c") == (1.0, 1.0)
    r1, rl = rouge_precision("c b a", "a b c")
    assert r1 == 1.0 and rl == pytest.approx(1 / 3, abs=1e-12)

    rng = random.Random(939)
    alphabet = "abcdefgh"
    for _ in range(1000):
        summary = " ".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 14)))
        source = " ".join(rng.choice(alphabet) for _ in range(rng.randrange(1, 18)))
        r1, rl = rouge_precision(summary, source)
        assert rl <= r1 + 1e-12
    ok("rouge: identity, hand LCS fixtures, rougeL <= rouge1 over 1000 pairs")


MTSAMPLES_CSV = REPO_ROOT / "sample_data" / "mtsamples.csv"


@pytest.mark.skipif(not MTSAMPLES_CSV.exists(), reason="real MTSamples CSV not bundled")
def test_rouge_corpus_values_on_real_data():
    reports = filter_by_reference_length(ingest_corpus(MTSAMPLES_CSV).reports, 12)
    stats = corpus_stats(reports)
    assert stats.rouge1_precision == pytest.approx(0.989, abs=0.01)
    assert stats.rougeL_precision == pytest.approx(0.939, abs=0.01)
    ok("rouge corpus means on real data")


# ---------------------------------------------------------------- criterion 7


def run_pipeline(work: Path) -> Path:
    work.mkdir(parents=True, exist_ok=True)

    def run(*argv):
        assert cli_main([str(a) for a in argv]) == 0

    reports = work / "reports.jsonl"
    filtered = work / "filtered.jsonl"
    split = work / "split.json"
    run("--quiet", "ingest", "--in", SAMPLE_CORPUS, "--out", reports)
    run("--quiet", "filter", "--in", reports, "--out", filtered, "--min-words", 12)
    run("--quiet", "split", "--in", filtered, "--out", split, "--seed", 20210401)

    output_paths = [work / "outputs-lead3.jsonl"]
    run("--quiet", "lead3", "--in", filtered, "--out", output_paths[0])
    rows = [json.loads(line) for line in filtered.read_text().splitlines()]
    for model_id, transform in (
        ("first-sentence", lambda r: r["body"].split(". ")[0] + "."),
        ("echo-reference", lambda r: r["reference"]),
        ("tail", lambda r: " ".join(r["body"].split()[-12:])),
    ):
        path = work / f"outputs-{model_id}.jsonl"
        path.write_text(
            "".join(
                json.dumps({"model_id": model_id, "report_id": r["id"], "text": transform(r)},
                           sort_keys=True) + "\n"
                for r in rows
            )
        )
        output_paths.append(path)

    bundles = work / "bundles"
    argv = ["--quiet", "build-tasks", "--reports", filtered, "--split", split,
            "--evaluators", "eval-1,eval-2,eval-3", "--num-tasks", 10,
            "--seed", 20210401, "--out-dir", bundles]
    for path in output_paths:
        argv += ["--outputs", path]
    run(*argv)

    study = load_study(bundles)
    wire = work / "wire.jsonl"
    wire.write_text(
        "".join(json.dumps(r, sort_keys=True) + "\n" for r in synth_wire_records(study))
    )
    resolved = work / "resolved.jsonl"
    run("--quiet", "import", "--bundles", bundles, "--in", wire, "--out", resolved)
    tables = work / "tables"
    run("--quiet", "report", "--in", resolved, "--bundles", bundles, "--out-dir", tables)
    return work


COMPARED_FILES = (
    "reports.jsonl", "filtered.jsonl", "split.json",
    "outputs-lead3.jsonl", "bundles/manifest.json", "bundles/tokens.json",
    "resolved.jsonl", "tables/results.md", "tables/results.csv",
    "tables/agreement.md", "tables/agreement.csv", "tables/coherence.md",
)
GOLDEN_FILES = ("split.json", "tables/results.md", "tables/agreement.md", "tables/coherence.md")


def test_pipeline_determinism(tmp_path):
    started = time.perf_counter()
    first = run_pipeline(tmp_path / "run1")
    second = run_pipeline(tmp_path / "run2")
    elapsed = time.perf_counter() - started
    for rel in COMPARED_FILES:
        assert (first / rel).read_bytes() == (second / rel).read_bytes(), rel
    for rel in GOLDEN_FILES:
        golden = GOLDEN_DIR / Path(rel).name
        assert golden.exists(), f"golden file missing: {golden}"
        assert (first / rel).read_bytes() == golden.read_bytes(), rel
    assert elapsed < 10.0, f"took {elapsed:.2f}s"
    ok(f"pipeline determinism: byte-identical runs and goldens in {elapsed:.2f}s")


# ---------------------------------------------------------------- criterion 8


def test_service_durability(tmp_path):
    from fastapi.testclient import TestClient

    bundle_dir, study = make_study(tmp_path, n_tasks=3)
    data_dir = tmp_path / "data"
    client = TestClient(create_app(bundle_dir, data_dir))

    def submit(row):
        return client.post(
            "/api/annotations", json=row,
            headers={"X-Evaluator-Token": study.tokens[row["evaluator_id"]]},
        )

    rows = synth_wire_records(study)
    for row in rows:
        assert submit(row).status_code == 201
    log_path = data_dir / "annotations.jsonl"
    before = log_path.read_bytes()
    assert submit(rows[0]).status_code == 409
    assert log_path.read_bytes() == before

    lines = log_path.read_text().splitlines()
    rng = random.Random(11)
    cuts = {0, 1, len(lines)} | {rng.randrange(0, len(lines) + 1) for _ in range(20)}
    for cut in sorted(cuts):
        prefix = tmp_path / f"cut-{cut}" / "annotations.jsonl"
        prefix.parent.mkdir()
        prefix.write_text("".join(line + "\n" for line in lines[:cut]))
        store = AnnotationStore(prefix, study=study)
        expected = {}
        for line in lines[:cut]:
            record = parse_record(json.loads(line), study)
            expected[record.key] = record
        assert {r.key: r for r in store.records()} == expected
    ok("service durability: fuzzed truncation folds, duplicate 409 leaves log unchanged")

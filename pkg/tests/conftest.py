from __future__ import annotations

import hashlib
from pathlib import Path

import pytest

from facteval.corpus import ClinicalReport
from facteval.metrics import COHERENCE_LABELS
from facteval.tasks import SystemOutput, Study, build_tasks, export_tasks, load_study

REPO_ROOT = Path(__file__).resolve().parent.parent
SAMPLE_CORPUS = REPO_ROOT / "sample_data" / "corpus.csv"

MODEL_IDS = ("bart-med", "bert-ext", "lead-3", "pegasus-cnn")
EVALUATORS = ("eval-1", "eval-2", "eval-3")


def make_reports(n: int, specialty: str = "General Medicine") -> list[ClinicalReport]:
    return [
        ClinicalReport(
            id=f"report-{i:02d}",
            specialty=specialty,
            body=(
                f"The patient is a {30 + i}-year-old who presents for evaluation. "
                "Symptoms began two weeks ago and have worsened. "
                "Examination findings were reassuring overall. "
                "We discussed a conservative plan in detail."
            ),
            reference=f"Patient {i} presents for evaluation of symptoms that began two weeks ago now.",
        )
        for i in range(1, n + 1)
    ]


def make_outputs(reports, models=MODEL_IDS) -> list[SystemOutput]:
    # candidate text must not leak the producing system's name
    return [
        SystemOutput(
            model_id=model,
            report_id=report.id,
            text=f"Candidate description {n + 1} for {report.id}: symptoms reviewed and plan made.",
        )
        for n, model in enumerate(models)
        for report in reports
    ]


def make_study(tmp_path: Path, n_tasks: int = 3, evaluators=EVALUATORS, seed: int = 11) -> tuple[Path, Study]:
    reports = make_reports(n_tasks)
    bundles = build_tasks(reports, make_outputs(reports), list(evaluators), seed)
    bundle_dir = tmp_path / "bundles"
    export_tasks(bundles, bundle_dir)
    return bundle_dir, load_study(bundle_dir)


def synth_wire_record(evaluator_id: str, task_id: str, label: str, salt: str = "") -> dict:
    """Deterministic, valid wire-format annotation record.

    Counts are derived from a hash so fixtures are stable across runs and
    Python versions without an RNG.
    """
    digest = hashlib.sha256(f"{salt}:{evaluator_id}:{task_id}:{label}".encode()).digest()
    r = 3 + digest[0] % 7
    g = 2 + digest[1] % 8
    common = digest[2] % (min(r, g) + 1)
    correct = common + digest[3] % (g - common + 1)
    coherence = COHERENCE_LABELS[0 if digest[4] % 12 < 10 else (1 if digest[4] % 12 < 11 else 2)]
    return {
        "task_id": task_id,
        "evaluator_id": evaluator_id,
        "label": label,
        "r_facts": r,
        "g_facts": g,
        "common_facts": common,
        "correct_facts": correct,
        "coherence": coherence,
        "submitted_at": "2021-04-01T12:00:00+00:00",
    }


def synth_wire_records(study: Study, salt: str = "") -> list[dict]:
    return [
        synth_wire_record(evaluator, bundle.task_id, candidate.label, salt)
        for bundle in study.bundles
        for evaluator in bundle.assigned
        for candidate in bundle.candidates
    ]


@pytest.fixture
def study_dir(tmp_path):
    bundle_dir, study = make_study(tmp_path)
    return bundle_dir, study

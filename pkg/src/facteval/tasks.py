"""Blinded annotation task bundles and the annotation record schema.

A task bundle pairs one test-split report with every system's generated
description, shuffled behind letter labels so evaluators never see which
system produced what. The label-to-system mapping lives only in the study
manifest; evaluator-facing payloads and files never contain a model id.
"""

from __future__ import annotations

import hashlib
import json
import random
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import ClinicalReport, seeded_shuffle
from .instructions import INSTRUCTIONS_TEXT
from .metrics import COHERENCE_LABELS, RawCounts, validate_counts, WAIVABLE_VIOLATIONS

MANIFEST_FILENAME = "manifest.json"
TOKENS_FILENAME = "tokens.json"
INSTRUCTIONS_FILENAME = "instructions.md"
TASKS_DIRNAME = "tasks"


class TaskError(ValueError):
    """Inconsistent study setup: missing/duplicate outputs, bad directories."""


class RecordError(ValueError):
    """A submitted annotation record that cannot be accepted as data."""

    def __init__(self, message: str, violations: Sequence[str] = ()):
        self.violations = list(violations) or [message]
        if violations:
            message = f"{message}: {', '.join(violations)}"
        super().__init__(message)


@dataclass(frozen=True)
class SystemOutput:
    model_id: str
    report_id: str
    text: str


@dataclass(frozen=True)
class Candidate:
    label: str
    model_id: str
    text: str


@dataclass(frozen=True)
class TaskBundle:
    task_id: str
    report: ClinicalReport
    candidates: tuple[Candidate, ...]
    shuffle_seed: int
    assigned: tuple[str, ...]

    @property
    def mapping(self) -> dict[str, str]:
        return {c.label: c.model_id for c in self.candidates}

    def evaluator_payload(self) -> dict:
        """The blinded view: everything an evaluator may see, nothing more."""
        return {
            "task_id": self.task_id,
            "report": {
                "id": self.report.id,
                "body": self.report.body,
                "reference": self.report.reference,
            },
            "candidates": [{"label": c.label, "text": c.text} for c in self.candidates],
            "assigned": list(self.assigned),
        }


@dataclass(frozen=True)
class FactSpan:
    target: str  # "reference" or a candidate blind label
    start: int
    end: int

    def as_dict(self) -> dict:
        return {"target": self.target, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class AnnotationRecord:
    """One evaluator's judgment of one (task, system) cell, resolved to a model id."""

    task_id: str
    evaluator_id: str
    model_id: str
    counts: RawCounts
    coherence: str
    label: str | None = None
    fact_spans: tuple[FactSpan, ...] = ()
    waiver: bool = False
    submitted_at: str = ""

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.evaluator_id, self.task_id, self.model_id)

    def as_dict(self) -> dict:
        data = {
            "task_id": self.task_id,
            "evaluator_id": self.evaluator_id,
            "model_id": self.model_id,
            "r_facts": self.counts.r_facts,
            "g_facts": self.counts.g_facts,
            "common_facts": self.counts.common_facts,
            "correct_facts": self.counts.correct_facts,
            "coherence": self.coherence,
            "waiver": self.waiver,
            "submitted_at": self.submitted_at,
        }
        if self.label is not None:
            data["label"] = self.label
        if self.fact_spans:
            data["fact_spans"] = [s.as_dict() for s in self.fact_spans]
        return data


def build_tasks(
    reports: Sequence[ClinicalReport],
    outputs: Sequence[SystemOutput],
    evaluators: Sequence[str],
    seed: int,
) -> list[TaskBundle]:
    """One bundle per report, every evaluator assigned to every bundle.

    Candidates are the systems' outputs for that report, shuffled per task
    with an RNG seeded by (seed, task_id) and labeled A, B, C, ... in
    display order.
    """
    if not evaluators:
        raise TaskError("evaluator list is empty")
    if not reports:
        raise TaskError("no reports to build tasks from")

    by_key: dict[tuple[str, str], SystemOutput] = {}
    for output in outputs:
        key = (output.model_id, output.report_id)
        if key in by_key:
            raise TaskError(f"duplicate output for model {key[0]!r}, report {key[1]!r}")
        if not output.text:
            raise TaskError(f"empty output text for model {key[0]!r}, report {key[1]!r}")
        by_key[key] = output
    model_ids = sorted({m for m, _ in by_key})
    if len(model_ids) > len(string.ascii_uppercase):
        raise TaskError(f"too many systems for single-letter labels: {len(model_ids)}")

    bundles = []
    for i, report in enumerate(reports, start=1):
        task_id = f"task-{i:03d}"
        missing = [m for m in model_ids if (m, report.id) not in by_key]
        if missing:
            raise TaskError(f"report {report.id!r} lacks outputs for: {', '.join(missing)}")
        rng = random.Random(f"{seed}:{task_id}")
        order = seeded_shuffle(model_ids, rng)
        candidates = tuple(
            Candidate(label=string.ascii_uppercase[pos], model_id=model_id,
                      text=by_key[(model_id, report.id)].text)
            for pos, model_id in enumerate(order)
        )
        bundles.append(
            TaskBundle(
                task_id=task_id,
                report=report,
                candidates=candidates,
                shuffle_seed=seed,
                assigned=tuple(evaluators),
            )
        )
    return bundles


def sample_reports(
    reports: Sequence[ClinicalReport], ids: Sequence[str], n: int, seed: int
) -> list[ClinicalReport]:
    """First n of the given report ids under a seeded shuffle."""
    by_id = {r.id: r for r in reports}
    unknown = [i for i in ids if i not in by_id]
    if unknown:
        raise TaskError(f"unknown report ids: {', '.join(unknown[:5])}")
    if n > len(ids):
        raise TaskError(f"asked for {n} reports but only {len(ids)} available")
    shuffled = seeded_shuffle(sorted(ids), random.Random(f"{seed}:sample"))
    return [by_id[i] for i in shuffled[:n]]


def evaluator_token(seed: int, evaluator_id: str) -> str:
    """Deterministic opaque token; derived so exports stay reproducible."""
    return hashlib.sha256(f"{seed}:{evaluator_id}".encode("utf-8")).hexdigest()[:16]


def _dump_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def export_tasks(bundles: Sequence[TaskBundle], out_dir: str | Path) -> None:
    """Write evaluator-facing task files plus the private study manifest.

    Layout: tasks/task-XXX.json (blinded payloads), manifest.json (the
    label-to-model mapping per task), tokens.json (per-evaluator auth
    tokens), instructions.md.
    """
    out_dir = Path(out_dir)
    tasks_dir = out_dir / TASKS_DIRNAME
    tasks_dir.mkdir(parents=True, exist_ok=True)

    seed = bundles[0].shuffle_seed if bundles else 0
    manifest = {
        "seed": seed,
        "tasks": [
            {"task_id": b.task_id, "report_id": b.report.id, "mapping": b.mapping}
            for b in bundles
        ],
    }
    evaluators = sorted({e for b in bundles for e in b.assigned})
    tokens = {e: evaluator_token(seed, e) for e in evaluators}

    for bundle in bundles:
        _dump_json(tasks_dir / f"{bundle.task_id}.json", bundle.evaluator_payload())
    _dump_json(out_dir / MANIFEST_FILENAME, manifest)
    _dump_json(out_dir / TOKENS_FILENAME, tokens)
    (out_dir / INSTRUCTIONS_FILENAME).write_text(INSTRUCTIONS_TEXT, encoding="utf-8")


@dataclass
class Study:
    """A bundle directory loaded back into memory (service/import side)."""

    seed: int
    bundles: list[TaskBundle]
    tokens: dict[str, str] = field(default_factory=dict)
    instructions: str = INSTRUCTIONS_TEXT

    @property
    def by_task(self) -> dict[str, TaskBundle]:
        return {b.task_id: b for b in self.bundles}

    @property
    def evaluators(self) -> list[str]:
        return sorted({e for b in self.bundles for e in b.assigned})

    @property
    def model_ids(self) -> list[str]:
        return sorted({c.model_id for b in self.bundles for c in b.candidates})

    def expected_cells(self) -> set[tuple[str, str, str]]:
        return {
            (evaluator, bundle.task_id, candidate.model_id)
            for bundle in self.bundles
            for evaluator in bundle.assigned
            for candidate in bundle.candidates
        }


def load_study(bundle_dir: str | Path) -> Study:
    bundle_dir = Path(bundle_dir)
    manifest_path = bundle_dir / MANIFEST_FILENAME
    if not manifest_path.exists():
        raise TaskError(f"no {MANIFEST_FILENAME} in {bundle_dir}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))

    bundles = []
    for entry in manifest["tasks"]:
        task_path = bundle_dir / TASKS_DIRNAME / f"{entry['task_id']}.json"
        if not task_path.exists():
            raise TaskError(f"missing task file: {task_path}")
        payload = json.loads(task_path.read_text(encoding="utf-8"))
        mapping = entry["mapping"]
        candidates = tuple(
            Candidate(label=c["label"], model_id=mapping[c["label"]], text=c["text"])
            for c in payload["candidates"]
        )
        bundles.append(
            TaskBundle(
                task_id=payload["task_id"],
                report=ClinicalReport(
                    id=payload["report"]["id"],
                    specialty="",
                    body=payload["report"]["body"],
                    reference=payload["report"]["reference"],
                ),
                candidates=candidates,
                shuffle_seed=manifest["seed"],
                assigned=tuple(payload["assigned"]),
            )
        )

    tokens_path = bundle_dir / TOKENS_FILENAME
    tokens = json.loads(tokens_path.read_text(encoding="utf-8")) if tokens_path.exists() else {}
    instructions_path = bundle_dir / INSTRUCTIONS_FILENAME
    instructions = (
        instructions_path.read_text(encoding="utf-8")
        if instructions_path.exists()
        else INSTRUCTIONS_TEXT
    )
    return Study(seed=manifest["seed"], bundles=bundles, tokens=tokens, instructions=instructions)


_REQUIRED_COUNTS = ("r_facts", "g_facts", "common_facts", "correct_facts")


def parse_record(data: dict, study: Study | None = None, where: str = "record") -> AnnotationRecord:
    """Validate one annotation record dict and resolve its blind label.

    Accepts wire records carrying a blind `label` (resolved through the
    study manifest) or already-resolved records carrying `model_id`. Count
    invariants are enforced here; a waiver flag only covers the waivable
    ones. Raises RecordError with named violations.
    """
    violations: list[str] = []
    for key in ("task_id", "evaluator_id"):
        if not isinstance(data.get(key), str) or not data.get(key):
            violations.append(f"missing_{key}")
    counts_values = {}
    for key in _REQUIRED_COUNTS:
        value = data.get(key)
        if not isinstance(value, int) or isinstance(value, bool):
            violations.append(f"non_integer_{key}")
        else:
            counts_values[key] = value
    coherence = data.get("coherence")
    if coherence not in COHERENCE_LABELS:
        violations.append("unknown_coherence_label")
    waiver = bool(data.get("waiver", False))
    if violations:
        raise RecordError(f"{where}: schema violations", violations)

    task_id = data["task_id"]
    label = data.get("label")
    model_id = data.get("model_id")
    if study is not None:
        bundle = study.by_task.get(task_id)
        if bundle is None:
            raise RecordError(f"{where}: unknown task {task_id!r}", ["unknown_task"])
        if data["evaluator_id"] not in bundle.assigned:
            raise RecordError(
                f"{where}: evaluator {data['evaluator_id']!r} not assigned to {task_id}",
                ["unassigned_evaluator"],
            )
        if label is not None:
            resolved = bundle.mapping.get(label)
            if resolved is None:
                raise RecordError(f"{where}: unknown label {label!r} for {task_id}", ["unknown_label"])
            if model_id is not None and model_id != resolved:
                raise RecordError(
                    f"{where}: label {label!r} resolves to {resolved!r}, not {model_id!r}",
                    ["label_model_mismatch"],
                )
            model_id = resolved
        elif model_id is not None:
            if model_id not in bundle.mapping.values():
                raise RecordError(f"{where}: unknown model {model_id!r} for {task_id}", ["unknown_model"])
    if model_id is None:
        raise RecordError(f"{where}: record carries neither label nor model_id", ["missing_model"])

    counts = RawCounts(**counts_values)
    count_violations = validate_counts(counts)
    if waiver:
        count_violations = [v for v in count_violations if v not in WAIVABLE_VIOLATIONS]
    if count_violations:
        raise RecordError(f"{where}: count invariant violations", count_violations)

    span_texts: dict[str, str] = {}
    if study is not None:
        bundle = study.by_task[task_id]
        span_texts = {"reference": bundle.report.reference}
        span_texts.update({c.label: c.text for c in bundle.candidates})
    spans = []
    for span in data.get("fact_spans", []) or []:
        target = span.get("target")
        start, end = span.get("start"), span.get("end")
        if not isinstance(start, int) or not isinstance(end, int) or not (0 <= start < end):
            raise RecordError(f"{where}: invalid fact span {span!r}", ["invalid_fact_span"])
        if span_texts:
            if target not in span_texts:
                raise RecordError(f"{where}: unknown span target {target!r}", ["invalid_fact_span"])
            if end > len(span_texts[target]):
                raise RecordError(
                    f"{where}: span {start}-{end} exceeds {target!r} text", ["invalid_fact_span"]
                )
        spans.append(FactSpan(target=target, start=start, end=end))

    return AnnotationRecord(
        task_id=task_id,
        evaluator_id=data["evaluator_id"],
        model_id=model_id,
        counts=counts,
        coherence=coherence,
        label=label,
        fact_spans=tuple(spans),
        waiver=waiver,
        submitted_at=data.get("submitted_at", ""),
    )


def import_annotations(source: str | Path | Iterable[dict], study: Study) -> list[AnnotationRecord]:
    """Read, validate, and resolve annotation records against a study.

    `source` is a JSONL file, a directory of JSONL files, or an iterable of
    already-parsed dicts. Duplicate (evaluator, task, model) records are
    rejected with their location.
    """
    rows: list[tuple[str, dict]] = []
    if isinstance(source, (str, Path)):
        path = Path(source)
        files = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
        if not files:
            raise RecordError(f"no .jsonl files in {path}")
        for file in files:
            with Path(file).open(encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        rows.append((f"{file}:{line_no}", json.loads(line)))
                    except json.JSONDecodeError as exc:
                        raise RecordError(f"{file}:{line_no}: invalid JSON: {exc}") from None
    else:
        rows = [(f"record {i}", data) for i, data in enumerate(source, start=1)]

    records: list[AnnotationRecord] = []
    seen: dict[tuple[str, str, str], str] = {}
    for where, data in rows:
        record = parse_record(data, study=study, where=where)
        if record.key in seen:
            raise RecordError(
                f"{where}: duplicate record for {record.key} (first at {seen[record.key]})",
                ["duplicate_record"],
            )
        seen[record.key] = where
        records.append(record)
    return records


def coverage_gaps(records: Sequence[AnnotationRecord], study: Study) -> list[tuple[str, str, str]]:
    """Cells of the expected evaluators x tasks x models grid with no record."""
    have = {r.key for r in records}
    return sorted(study.expected_cells() - have)

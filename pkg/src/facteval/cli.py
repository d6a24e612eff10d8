"""Command-line entry point wiring the pipeline end to end.

Subcommands: ingest, filter, split, stats, lead3, build-tasks, serve,
import, metrics, agreement, report. All outputs are deterministic given
inputs and flags; diagnostics go to stderr; exit code 1 marks data or
validation errors and 2 marks usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import agreement as agreement_module
from . import corpus as corpus_module
from . import report as report_module
from . import service as service_module
from . import tasks as tasks_module
from .corpus import ClinicalReport, CorpusError, CorpusSplit
from .tasks import RecordError, SystemOutput, TaskError

#: Fixed default seed so runs are reproducible without hidden state.
DEFAULT_SEED = 20210401


class CliError(Exception):
    """Data or validation failure; maps to exit code 1."""


def _log(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise CliError(f"file not found: {path}")
    rows = []
    with path.open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CliError(f"{path}:{line_no}: invalid JSON: {exc}") from None
    return rows


def _load_reports(path: Path) -> list[ClinicalReport]:
    if path.suffix.lower() == ".csv":
        return corpus_module.ingest_corpus(path).reports
    return [
        ClinicalReport(
            id=row["id"], specialty=row.get("specialty", ""), body=row["body"],
            reference=row["reference"],
        )
        for row in _read_jsonl(path)
    ]


def _report_row(report: ClinicalReport) -> dict:
    return {
        "id": report.id,
        "specialty": report.specialty,
        "body": report.body,
        "reference": report.reference,
    }


def _load_records(path: Path, study=None) -> list:
    return tasks_module.import_annotations(path, study) if study else [
        tasks_module.parse_record(row, study=None, where=f"{path}:{i}")
        for i, row in enumerate(_read_jsonl(path), start=1)
    ]


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"--ratios needs three comma-separated fractions, got {text!r}")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise CliError(f"--ratios values must be numbers, got {text!r}") from None


def cmd_ingest(args) -> int:
    result = corpus_module.ingest_corpus(args.input)
    _write_jsonl(args.out, (_report_row(r) for r in result.reports))
    _log(args, f"ingested {len(result.reports)} reports, dropped {result.dropped} rows -> {args.out}")
    return 0


def cmd_filter(args) -> int:
    reports = _load_reports(args.input)
    kept = corpus_module.filter_by_reference_length(reports, args.min_words)
    _write_jsonl(args.out, (_report_row(r) for r in kept))
    _log(args, f"kept {len(kept)} of {len(reports)} reports (min {args.min_words} reference words)")
    return 0


def cmd_split(args) -> int:
    reports = _load_reports(args.input)
    split = corpus_module.stratified_split(reports, _parse_ratios(args.ratios), args.seed)
    args.out.write_text(json.dumps(split.as_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _log(args, f"split {len(reports)} reports into {len(split.train)}/{len(split.dev)}/{len(split.test)}")
    return 0


def cmd_stats(args) -> int:
    reports = _load_reports(args.input)
    if args.min_words:
        reports = corpus_module.filter_by_reference_length(reports, args.min_words)
    stats = corpus_module.corpus_stats(reports)
    print(json.dumps(stats.as_dict(), indent=2, sort_keys=True))
    return 0


def cmd_lead3(args) -> int:
    reports = _load_reports(args.input)
    if args.ids:
        wanted = set(args.ids.split(","))
        reports = [r for r in reports if r.id in wanted]
    rows = [
        {"model_id": args.model_id, "report_id": r.id, "text": corpus_module.lead3(r)}
        for r in reports
    ]
    _write_jsonl(args.out, rows)
    _log(args, f"wrote {len(rows)} {args.model_id} outputs -> {args.out}")
    return 0


def cmd_build_tasks(args) -> int:
    reports = _load_reports(args.reports)
    split = CorpusSplit.from_dict(json.loads(args.split.read_text(encoding="utf-8")))
    outputs = [
        SystemOutput(model_id=row["model_id"], report_id=row["report_id"], text=row["text"])
        for path in args.outputs
        for row in _read_jsonl(path)
    ]
    evaluators = [e.strip() for e in args.evaluators.split(",") if e.strip()]
    sampled = tasks_module.sample_reports(reports, split.test, args.num_tasks, args.seed)
    bundles = tasks_module.build_tasks(sampled, outputs, evaluators, args.seed)
    tasks_module.export_tasks(bundles, args.out_dir)
    _log(args, f"built {len(bundles)} tasks x {len(bundles[0].candidates)} candidates "
               f"x {len(evaluators)} evaluators -> {args.out_dir}")
    return 0


def cmd_serve(args) -> int:
    try:
        service_module.run_service(
            args.bundles, args.data, host=args.host, port=args.port,
            allow_overwrite=args.allow_overwrite, ui_dir=args.ui,
        )
    except OSError as exc:
        raise CliError(f"cannot bind {args.host}:{args.port}: {exc}") from None
    return 0


def cmd_import(args) -> int:
    study = tasks_module.load_study(args.bundles)
    records = tasks_module.import_annotations(args.input, study)
    _write_jsonl(args.out, (r.as_dict() for r in records))
    gaps = tasks_module.coverage_gaps(records, study)
    _log(args, f"imported {len(records)} records -> {args.out}")
    if gaps:
        _log(args, f"coverage: {len(gaps)} expected cells missing "
                   f"(e.g. {', '.join('/'.join(g) for g in gaps[:3])})")
    else:
        _log(args, "coverage: complete grid")
    return 0


def cmd_metrics(args) -> int:
    records = _load_records(args.input)
    table = report_module.results_table(records)
    print(json.dumps(table.as_dict(), indent=2, sort_keys=True))
    return 0


def cmd_agreement(args) -> int:
    records = _load_records(args.input)
    table = report_module.agreement_table(
        records, metric=args.metric, coherence_numeric=not args.coherence_nominal
    )
    if args.format == "csv":
        print(table.to_csv(), end="")
    elif args.format == "json":
        print(json.dumps(table.as_dict(), indent=2, sort_keys=True))
    else:
        print(table.to_markdown(), end="")
    return 0


def cmd_report(args) -> int:
    records = _load_records(args.input)
    models = None
    if args.bundles:
        models = tasks_module.load_study(args.bundles).model_ids
    results = report_module.results_table(records, models=models)
    coherence = report_module.coherence_report(records)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "results.md").write_text(results.to_markdown(), encoding="utf-8")
    (out_dir / "results.csv").write_text(results.to_csv(), encoding="utf-8")
    (out_dir / "coherence.md").write_text(coherence, encoding="utf-8")
    if len({r.evaluator_id for r in records}) >= 2:
        agreement = report_module.agreement_table(records)
        (out_dir / "agreement.md").write_text(agreement.to_markdown(), encoding="utf-8")
        (out_dir / "agreement.csv").write_text(agreement.to_csv(), encoding="utf-8")
        _log(args, f"wrote results/agreement/coherence tables -> {out_dir}")
    else:
        _log(args, f"wrote results/coherence tables -> {out_dir} "
                   "(agreement skipped: needs records from at least two evaluators)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facteval",
        description="Fact-counting human evaluation harness for clinical report summarization.",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress messages")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "read a corpus CSV into a reports JSONL file")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = add("filter", cmd_filter, "drop reports with short references")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--min-words", type=int, default=corpus_module.DEFAULT_MIN_REFERENCE_WORDS)

    p = add("split", cmd_split, "stratified train/dev/test split manifest")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--ratios", default="0.8,0.1,0.1")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"RNG seed (default {DEFAULT_SEED})")

    p = add("stats", cmd_stats, "corpus statistics as JSON on stdout")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--min-words", type=int, default=0)

    p = add("lead3", cmd_lead3, "first-three-sentences baseline outputs")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--ids", default="", help="comma-separated report ids (default: all)")
    p.add_argument("--model-id", default="lead-3")

    p = add("build-tasks", cmd_build_tasks, "blinded annotation task bundles")
    p.add_argument("--reports", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True)
    p.add_argument("--outputs", type=Path, action="append", required=True,
                   help="system outputs JSONL (repeatable)")
    p.add_argument("--evaluators", required=True, help="comma-separated evaluator ids")
    p.add_argument("--num-tasks", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                   help=f"RNG seed (default {DEFAULT_SEED})")
    p.add_argument("--out-dir", type=Path, required=True)

    p = add("serve", cmd_serve, "run the annotation HTTP service")
    p.add_argument("--bundles", type=Path, required=True)
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--allow-overwrite", action="store_true")
    p.add_argument("--ui", type=Path, default=None, help="static UI directory to mount at /")

    p = add("import", cmd_import, "validate and resolve submitted annotations")
    p.add_argument("--bundles", type=Path, required=True)
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = add("metrics", cmd_metrics, "per-cell aggregates as JSON on stdout")
    p.add_argument("--in", dest="input", type=Path, required=True)

    p = add("agreement", cmd_agreement, "Krippendorff alpha table")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--format", choices=("md", "csv", "json"), default="md")
    p.add_argument("--metric", choices=(agreement_module.INTERVAL, agreement_module.NOMINAL),
                   default=agreement_module.INTERVAL)
    p.add_argument("--coherence-nominal", action="store_true",
                   help="use raw labels with the nominal metric for the coherence row")

    p = add("report", cmd_report, "write results/agreement/coherence table files")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--bundles", type=Path, default=None)
    p.add_argument("--out-dir", type=Path, required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, CorpusError, TaskError, RecordError,
            agreement_module.AgreementError, service_module.StoreError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

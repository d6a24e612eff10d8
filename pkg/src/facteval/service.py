"""HTTP service: serves blinded task bundles, accepts and persists annotations.

Persistence is a single append-only JSONL file. A submission is appended
and fsynced before it is acknowledged or indexed, so the in-memory index is
always a pure fold of the durable log and a restart reproduces it exactly.
Duplicate (evaluator, task, model) submissions are rejected unless the
service allows overwrites and the record asks for one; superseding records
are appended, never rewritten, so the full history stays in the log.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from fastapi import Body, FastAPI, Header, Query
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from . import report as report_module
from .tasks import AnnotationRecord, RecordError, Study, load_study, parse_record

LOG_FILENAME = "annotations.jsonl"


class StoreError(RuntimeError):
    """The annotation log cannot be folded into a consistent state."""


class DuplicateRecordError(ValueError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"duplicate record for {key}")


class AnnotationStore:
    """Append-only, write-ahead JSONL log with an in-memory key index."""

    def __init__(self, path: str | Path, study: Study | None = None):
        self.path = Path(path)
        self._study = study
        self._lock = threading.Lock()
        self._index: dict[tuple[str, str, str], AnnotationRecord] = {}
        self._load()

    def _parse_line(self, line: str, line_no: int) -> tuple[AnnotationRecord, bool]:
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StoreError(f"{self.path}: corrupt log line {line_no}: {exc}") from None
        try:
            record = parse_record(data, study=self._study, where=f"{self.path}:{line_no}")
        except RecordError as exc:
            raise StoreError(f"{self.path}: corrupt log line {line_no}: {exc}") from None
        return record, bool(data.get("overwrite", False))

    def _load(self) -> None:
        self._index = {}
        if not self.path.exists():
            return
        with self.path.open(encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                record, overwrite = self._parse_line(line, line_no)
                if record.key in self._index and not overwrite:
                    raise StoreError(
                        f"{self.path}: corrupt log line {line_no}: duplicate record "
                        f"for {record.key} without overwrite flag"
                    )
                self._index[record.key] = record

    def submit(self, record: AnnotationRecord, overwrite: bool = False,
               allow_overwrite: bool = False) -> None:
        """Durably append one accepted record; index only after the fsync."""
        with self._lock:
            if record.key in self._index:
                if not (overwrite and allow_overwrite):
                    raise DuplicateRecordError(record.key)
            data = record.as_dict()
            if overwrite and record.key in self._index:
                data["overwrite"] = True
            line = json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n"
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            self._index[record.key] = record

    def has(self, key: tuple[str, str, str]) -> bool:
        return key in self._index

    def records(self) -> list[AnnotationRecord]:
        return [self._index[key] for key in sorted(self._index)]

    def count_for(self, evaluator_id: str) -> int:
        return sum(1 for (e, _t, _m) in self._index if e == evaluator_id)


def _now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def next_task(study: Study, store: AnnotationStore, evaluator_id: str):
    """Lowest-indexed assigned bundle with an unannotated candidate, else None."""
    for bundle in study.bundles:
        if evaluator_id not in bundle.assigned:
            continue
        for candidate in bundle.candidates:
            if not store.has((evaluator_id, bundle.task_id, candidate.model_id)):
                return bundle
    return None


def create_app(bundles_dir: str | Path, data_dir: str | Path,
               allow_overwrite: bool = False) -> FastAPI:
    """Build the service around a bundle directory and a writable data directory."""
    study = load_study(bundles_dir)
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    store = AnnotationStore(data_dir / LOG_FILENAME, study=study)

    app = FastAPI(title="facteval annotation service")
    app.state.study = study
    app.state.store = store

    def _authorized(evaluator_id: str, token: str | None) -> bool:
        if not study.tokens:
            return True
        return bool(token) and study.tokens.get(evaluator_id) == token

    def _any_token(token: str | None) -> bool:
        if not study.tokens:
            return True
        return bool(token) and token in study.tokens.values()

    @app.get("/api/instructions", response_class=PlainTextResponse)
    def instructions() -> str:
        return study.instructions

    @app.get("/api/tasks/next")
    def tasks_next(
        evaluator: str = Query(...),
        x_evaluator_token: str | None = Header(default=None),
    ):
        if evaluator not in study.evaluators:
            return JSONResponse({"error": f"unknown evaluator: {evaluator}"}, status_code=404)
        if not _authorized(evaluator, x_evaluator_token):
            return JSONResponse({"error": "invalid evaluator token"}, status_code=401)
        bundle = next_task(study, store, evaluator)
        if bundle is None:
            return Response(status_code=204)
        return bundle.evaluator_payload()

    @app.get("/api/tasks/{task_id}")
    def task_by_id(task_id: str, x_evaluator_token: str | None = Header(default=None)):
        if not _any_token(x_evaluator_token):
            return JSONResponse({"error": "invalid evaluator token"}, status_code=401)
        bundle = study.by_task.get(task_id)
        if bundle is None:
            return JSONResponse({"error": f"unknown task: {task_id}"}, status_code=404)
        return bundle.evaluator_payload()

    @app.post("/api/annotations")
    def submit_annotation(
        payload: dict = Body(...),
        x_evaluator_token: str | None = Header(default=None),
    ):
        evaluator_id = payload.get("evaluator_id")
        if isinstance(evaluator_id, str) and not _authorized(evaluator_id, x_evaluator_token):
            return JSONResponse({"error": "invalid evaluator token"}, status_code=401)
        try:
            record = parse_record(payload, study=study, where="submission")
        except RecordError as exc:
            return JSONResponse({"violations": exc.violations}, status_code=422)
        record = replace(record, submitted_at=_now_rfc3339())
        try:
            store.submit(record, overwrite=bool(payload.get("overwrite", False)),
                         allow_overwrite=allow_overwrite)
        except DuplicateRecordError:
            return JSONResponse(
                {"error": "duplicate submission", "key": list(record.key)}, status_code=409
            )
        return JSONResponse(record.as_dict(), status_code=201)

    @app.get("/api/progress")
    def progress():
        expected = study.expected_cells()
        per_evaluator = {}
        for evaluator in study.evaluators:
            total = sum(1 for (e, _t, _m) in expected if e == evaluator)
            accepted = store.count_for(evaluator)
            per_evaluator[evaluator] = {
                "accepted": accepted,
                "expected": total,
                "remaining": total - accepted,
            }
        return {
            "expected_total": len(expected),
            "accepted_total": len(store.records()),
            "evaluators": per_evaluator,
        }

    @app.get("/api/results")
    def results():
        records = store.records()
        if not records:
            return {"models": [], "evaluators": [], "cells": {}, "avg": {}, "best": {}}
        return report_module.results_table(records, models=study.model_ids).as_dict()

    return app


def run_service(bundles_dir: str | Path, data_dir: str | Path, host: str = "127.0.0.1",
                port: int = 8000, allow_overwrite: bool = False,
                ui_dir: str | Path | None = None) -> None:
    """Start uvicorn on a freshly built app; blocks until shutdown."""
    import uvicorn

    app = create_app(bundles_dir, data_dir, allow_overwrite=allow_overwrite)
    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    uvicorn.run(app, host=host, port=port, log_level="warning")

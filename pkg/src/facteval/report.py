"""Render aggregated metrics and agreement statistics as tables.

Two tables: the results table (models x metrics, one column per evaluator
plus an Avg column) and the agreement table (raw and derived quantities x
rater groupings). Numbers are rounded half away from zero to two decimals
at render time only; Markdown and CSV renderings carry identical numeric
content.
"""

from __future__ import annotations

import io
import csv as csv_module
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

from .agreement import (
    ALL_QUANTITIES,
    AlphaResult,
    agreement_report,
    coherence_distribution,
)
from .metrics import (
    CELL_METRIC_NAMES,
    CellAggregate,
    aggregate_cell,
    aggregate_row,
    derive_metrics,
    round_half_away,
)
from .tasks import AnnotationRecord

METRIC_DISPLAY = {
    "precision": "Precision",
    "recall": "Recall",
    "f_score": "F-Score",
    "accuracy": "Accuracy",
    "coherence": "Coherence",
}

QUANTITY_DISPLAY = {
    "r_facts": "R facts",
    "g_facts": "G facts",
    "common_facts": "G&R facts",
    "correct_facts": "G acc facts",
    "coherence": "Coherence",
    "precision": "Precision",
    "recall": "Recall",
    "f_score": "F-Score",
    "accuracy": "Accuracy",
}

COHERENCE_DISPLAY = {
    "coherent": "Coherent",
    "minor_errors": "Minor Errors",
    "major_errors": "Major Errors",
}


def _fmt(value: float | None) -> str:
    if value is None:
        return "n/a"
    return f"{round_half_away(value):.2f}"


@dataclass
class ResultsTable:
    models: list[str]
    evaluators: list[str]
    cells: dict[tuple[str, str], CellAggregate]  # (model, evaluator) -> aggregate
    avg: dict[str, dict[str, float | None]]  # model -> metric -> mean over evaluators
    best: dict[str, list[str]]  # metric -> models sharing the max rounded Avg

    def as_dict(self) -> dict:
        return {
            "models": self.models,
            "evaluators": self.evaluators,
            "metrics": list(CELL_METRIC_NAMES),
            "cells": {
                model: {
                    evaluator: {
                        "means": self.cells[(model, evaluator)].means,
                        "n_tasks": self.cells[(model, evaluator)].n_tasks,
                        "n_excluded": self.cells[(model, evaluator)].n_excluded,
                    }
                    for evaluator in self.evaluators
                    if (model, evaluator) in self.cells
                }
                for model in self.models
            },
            "avg": self.avg,
            "best": self.best,
        }

    def _rows(self) -> list[list[str]]:
        rows = []
        for model in self.models:
            for metric in CELL_METRIC_NAMES:
                row = [model, METRIC_DISPLAY[metric]]
                for evaluator in self.evaluators:
                    cell = self.cells.get((model, evaluator))
                    row.append(_fmt(cell.means[metric]) if cell else "n/a")
                row.append(_fmt(self.avg[model][metric]))
                row.append("yes" if model in self.best.get(metric, []) else "")
                rows.append(row)
        return rows

    def header(self) -> list[str]:
        return ["Model", "Metric"] + self.evaluators + ["Avg", "Best"]

    def to_markdown(self) -> str:
        return _markdown_table(self.header(), self._rows())

    def to_csv(self) -> str:
        return _csv_table(self.header(), self._rows())


def results_table(
    records: Sequence[AnnotationRecord],
    models: Sequence[str] | None = None,
    evaluators: Sequence[str] | None = None,
) -> ResultsTable:
    """Aggregate records into the per-evaluator / Avg results table.

    Incomplete cells are aggregated over whatever tasks they have (n_tasks
    says how many); the Avg column averages the evaluator cell means via
    aggregate_row; Best flags the models sharing the max rounded Avg of
    each metric.
    """
    if not records:
        raise ValueError("no annotation records")
    by_cell: dict[tuple[str, str], list[AnnotationRecord]] = defaultdict(list)
    for record in records:
        by_cell[(record.model_id, record.evaluator_id)].append(record)

    models = list(models) if models else sorted({m for m, _ in by_cell})
    evaluators = list(evaluators) if evaluators else sorted({e for _, e in by_cell})

    cells: dict[tuple[str, str], CellAggregate] = {}
    for (model, evaluator), cell_records in by_cell.items():
        per_task = [
            (derive_metrics(r.counts, waiver=r.waiver), r.coherence)
            for r in sorted(cell_records, key=lambda r: r.task_id)
        ]
        cells[(model, evaluator)] = aggregate_cell(per_task, model_id=model, evaluator_id=evaluator)

    avg: dict[str, dict[str, float | None]] = {}
    for model in models:
        model_cells = [cells[(model, e)] for e in evaluators if (model, e) in cells]
        avg[model] = aggregate_row(model_cells)

    best: dict[str, list[str]] = {}
    for metric in CELL_METRIC_NAMES:
        rounded = {
            model: round_half_away(avg[model][metric])
            for model in models
            if avg[model][metric] is not None
        }
        if rounded:
            top = max(rounded.values())
            best[metric] = [m for m in models if rounded.get(m) == top]
        else:
            best[metric] = []
    return ResultsTable(models=models, evaluators=evaluators, cells=cells, avg=avg, best=best)


@dataclass
class AgreementTable:
    evaluators: list[str]
    rows: dict[str, dict[str, AlphaResult | None]]  # quantity -> column key -> result

    def column_keys(self) -> list[str]:
        keys = ["all"]
        evs = self.evaluators
        for i in range(len(evs)):
            for j in range(i + 1, len(evs)):
                keys.append(f"{evs[i]}-{evs[j]}")
        return keys

    def header(self) -> list[str]:
        return ["Quantity"] + ["-".join(self.evaluators) if k == "all" else k for k in self.column_keys()]

    def _rows(self) -> list[list[str]]:
        rows = []
        for quantity in ALL_QUANTITIES:
            row = [QUANTITY_DISPLAY[quantity]]
            for key in self.column_keys():
                result = self.rows[quantity].get(key)
                row.append(_fmt(result.alpha) if result is not None else "n/a")
            rows.append(row)
        return rows

    def as_dict(self) -> dict:
        return {
            "evaluators": self.evaluators,
            "rows": {
                quantity: {
                    key: (result.as_dict() if result is not None else None)
                    for key, result in columns.items()
                }
                for quantity, columns in self.rows.items()
            },
        }

    def to_markdown(self) -> str:
        return _markdown_table(self.header(), self._rows())

    def to_csv(self) -> str:
        return _csv_table(self.header(), self._rows())


def agreement_table(
    records: Sequence[AnnotationRecord],
    metric: str = "interval",
    coherence_numeric: bool = True,
) -> AgreementTable:
    """Agreement table: 5 raw quantities + 4 derived metrics, overall and per pair."""
    report = agreement_report(records, metric=metric, coherence_numeric=coherence_numeric)
    evaluators = sorted({r.evaluator_id for r in records})
    rows: dict[str, dict[str, AlphaResult | None]] = {}
    for quantity in ALL_QUANTITIES:
        columns: dict[str, AlphaResult | None] = {"all": report[quantity]["all"]}
        for (a, b), result in report[quantity]["pairs"].items():
            columns[f"{a}-{b}"] = result
        rows[quantity] = columns
    return AgreementTable(evaluators=evaluators, rows=rows)


def coherence_report(records: Sequence[AnnotationRecord]) -> str:
    """Markdown summary of the coherence class shares and unanimity rate."""
    dist = coherence_distribution(records)
    lines = [
        "# Coherence",
        "",
        _markdown_table(
            ["Label", "Count", "Share"],
            [
                [
                    COHERENCE_DISPLAY[label],
                    str(dist.counts[label]),
                    f"{round_half_away(dist.shares[label] * 100):.2f}%",
                ]
                for label in dist.counts
            ],
        ).rstrip("\n"),
        "",
        (
            f"Unanimity: {dist.n_unanimous} of {dist.n_units} units rated Coherent "
            f"by every rater ({round_half_away(dist.unanimity_rate * 100):.2f}%)."
        ),
        "",
    ]
    return "\n".join(lines)


def _markdown_table(header: list[str], rows: list[list[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"


def _csv_table(header: list[str], rows: list[list[str]]) -> str:
    buffer = io.StringIO()
    writer = csv_module.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()

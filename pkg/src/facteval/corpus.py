"""Corpus ingestion, filtering, stratified splitting, and extractiveness stats.

The source corpus is a Kaggle-style CSV of clinical transcription reports.
Each report carries a free-text body and a short description used as the
reference summary. This module turns that CSV into ClinicalReport records,
drops unusable rows, filters short references, splits per specialty, and
measures how extractive the references are (unigram / LCS precision).
"""

from __future__ import annotations

import csv
import math
import random
import re
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

DEFAULT_COLUMNS = {
    "id": "sample_name",
    "specialty": "medical_specialty",
    "body": "transcription",
    "reference": "description",
}

DEFAULT_MIN_REFERENCE_WORDS = 12

#: Tokens that end with a period but never end a sentence. Matched against
#: the whitespace-delimited token ending at the punctuation mark,
#: case-sensitively, so "No. 5" is kept together while "The answer is no."
#: still splits.
ABBREVIATIONS = ("Dr.", "Mr.", "Mrs.", "Ms.", "vs.", "e.g.", "i.e.", "mg.", "ml.", "No.")

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CorpusError(ValueError):
    """Bad corpus input: missing files/columns, malformed rows, empty corpora."""


@dataclass(frozen=True)
class ClinicalReport:
    id: str
    specialty: str
    body: str
    reference: str


@dataclass(frozen=True)
class IngestResult:
    reports: list[ClinicalReport]
    dropped: int


@dataclass(frozen=True)
class CorpusStats:
    report_count: int
    mean_body_words: float
    mean_reference_words: float
    rouge1_precision: float
    rougeL_precision: float

    def as_dict(self) -> dict[str, float | int]:
        return {
            "report_count": self.report_count,
            "mean_body_words": self.mean_body_words,
            "mean_reference_words": self.mean_reference_words,
            "rouge1_precision": self.rouge1_precision,
            "rougeL_precision": self.rougeL_precision,
        }


@dataclass(frozen=True)
class CorpusSplit:
    seed: int
    ratios: tuple[float, float, float]
    train: list[str]
    dev: list[str]
    test: list[str]

    def as_dict(self) -> dict:
        return {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "train": self.train,
            "dev": self.dev,
            "test": self.test,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusSplit":
        return cls(
            seed=data["seed"],
            ratios=tuple(data["ratios"]),
            train=list(data["train"]),
            dev=list(data["dev"]),
            test=list(data["test"]),
        )


def word_count(text: str) -> int:
    """Whitespace words; no punctuation stripping."""
    return len(text.split())


def ingest_corpus(path: str | Path, column_map: dict[str, str] | None = None) -> IngestResult:
    """Read a corpus CSV into ClinicalReports.

    Rows with an empty body or empty reference are dropped (counted in the
    result); duplicate ids get a numeric suffix in row order. Malformed rows
    and missing mapped columns raise CorpusError with their location.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"corpus file not found: {path}")
    columns = dict(DEFAULT_COLUMNS)
    if column_map:
        columns.update(column_map)

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"empty corpus file: {path}") from None
        index: dict[str, int] = {}
        for field, column in columns.items():
            if column not in header:
                raise CorpusError(f"missing column {column!r} in {path}")
            index[field] = header.index(column)

        reports: list[ClinicalReport] = []
        seen: Counter[str] = Counter()
        used: set[str] = set()
        dropped = 0
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise CorpusError(
                    f"{path}: malformed row {row_no}: expected {len(header)} fields, got {len(row)}"
                )
            body = row[index["body"]].strip()
            reference = row[index["reference"]].strip()
            if not body or not reference:
                dropped += 1
                continue
            base_id = row[index["id"]].strip()
            seen[base_id] += 1
            report_id = base_id if seen[base_id] == 1 else f"{base_id}-{seen[base_id]}"
            while report_id in used:
                seen[base_id] += 1
                report_id = f"{base_id}-{seen[base_id]}"
            used.add(report_id)
            reports.append(
                ClinicalReport(
                    id=report_id,
                    specialty=row[index["specialty"]].strip(),
                    body=body,
                    reference=reference,
                )
            )
    return IngestResult(reports=reports, dropped=dropped)


def filter_by_reference_length(
    reports: Iterable[ClinicalReport], min_words: int = DEFAULT_MIN_REFERENCE_WORDS
) -> list[ClinicalReport]:
    """Keep reports whose reference has at least min_words whitespace words."""
    if min_words < 0:
        raise ValueError("min_words must be >= 0")
    return [r for r in reports if word_count(r.reference) >= min_words]


def seeded_shuffle(items: Sequence, rng: random.Random) -> list:
    """Fisher-Yates driven by rng.random() only.

    random.Random.shuffle() is not guaranteed stable across CPython versions;
    random() is, and golden files depend on these permutations.
    """
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        out[i], out[j] = out[j], out[i]
    return out


def stratified_split(
    reports: Sequence[ClinicalReport],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> CorpusSplit:
    """Split per specialty: floor(ratio*n) for train and dev, remainder to test.

    Within each specialty, reports are sorted by id and shuffled with an RNG
    seeded by (seed, specialty), then sliced contiguously; the result is
    deterministic for a fixed seed regardless of input order.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three non-negative fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")
    if not reports:
        raise CorpusError("cannot split an empty corpus")

    by_specialty: dict[str, list[str]] = defaultdict(list)
    for report in reports:
        specialty = report.specialty.strip()
        if not specialty:
            raise CorpusError(f"report {report.id} has no specialty")
        by_specialty[specialty].append(report.id)

    train: list[str] = []
    dev: list[str] = []
    test: list[str] = []
    for specialty in sorted(by_specialty):
        rng = random.Random(f"{seed}:{specialty}")
        ids = seeded_shuffle(sorted(by_specialty[specialty]), rng)
        n = len(ids)
        # epsilon restores mathematical floor when the float product lands
        # a hair under an integer (e.g. 0.3 * 10)
        n_train = math.floor(ratios[0] * n + 1e-9)
        n_dev = math.floor(ratios[1] * n + 1e-9)
        train.extend(ids[:n_train])
        dev.extend(ids[n_train : n_train + n_dev])
        test.extend(ids[n_train + n_dev :])
    return CorpusSplit(seed=seed, ratios=tuple(ratios), train=train, dev=dev, test=test)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence of two token sequences."""
    if not a or not b:
        return 0
    if len(b) < len(a):
        a, b = b, a
    prev = [0] * (len(a) + 1)
    for y in b:
        cur = [0]
        for i, x in enumerate(a, start=1):
            if x == y:
                cur.append(prev[i - 1] + 1)
            else:
                cur.append(max(cur[i - 1], prev[i]))
        prev = cur
    return prev[-1]


def rouge_precision(summary: str, source: str) -> tuple[float, float]:
    """Unigram (clipped) and LCS precision of summary tokens against source.

    rouge1 = sum_t min(count_summary(t), count_source(t)) / |summary tokens|;
    rougeL = LCS(summary tokens, source tokens) / |summary tokens|.
    """
    summary_tokens = tokenize(summary)
    if not summary_tokens:
        raise CorpusError("summary has no tokens after tokenization")
    source_tokens = tokenize(source)
    summary_counts = Counter(summary_tokens)
    source_counts = Counter(source_tokens)
    clipped = sum(min(count, source_counts[token]) for token, count in summary_counts.items())
    rouge1 = clipped / len(summary_tokens)
    rougel = lcs_length(summary_tokens, source_tokens) / len(summary_tokens)
    return rouge1, rougel


def corpus_stats(reports: Sequence[ClinicalReport]) -> CorpusStats:
    """Corpus means: word counts plus per-report reference-vs-body rouge precision."""
    if not reports:
        raise CorpusError("cannot compute stats over an empty corpus")
    rouge1_scores = []
    rougel_scores = []
    for report in reports:
        r1, rl = rouge_precision(report.reference, report.body)
        rouge1_scores.append(r1)
        rougel_scores.append(rl)
    n = len(reports)
    return CorpusStats(
        report_count=n,
        mean_body_words=sum(word_count(r.body) for r in reports) / n,
        mean_reference_words=sum(word_count(r.reference) for r in reports) / n,
        rouge1_precision=sum(rouge1_scores) / n,
        rougeL_precision=sum(rougel_scores) / n,
    )


def split_sentences(text: str) -> list[str]:
    """Rule-based segmentation: boundary at '.', '!' or '?' followed by
    whitespace and an uppercase letter or digit, suppressed after the fixed
    abbreviation list. A text with no boundary is a single sentence.
    """
    sentences: list[str] = []
    n = len(text)
    start = 0
    i = 0
    while i < n:
        if text[i] in ".!?":
            j = i + 1
            k = j
            while k < n and text[k].isspace():
                k += 1
            if k > j and k < n and (text[k].isupper() or text[k].isdigit()):
                token_start = i
                while token_start > start and not text[token_start - 1].isspace():
                    token_start -= 1
                if text[token_start : i + 1] not in ABBREVIATIONS:
                    sentence = text[start : i + 1].strip()
                    if sentence:
                        sentences.append(sentence)
                    start = k
                    i = k
                    continue
        i += 1
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def lead3(report: ClinicalReport, n_sentences: int = 3) -> str:
    """Baseline summary: the first sentences of the report body, verbatim."""
    sentences = split_sentences(report.body)
    return " ".join(sentences[:n_sentences])

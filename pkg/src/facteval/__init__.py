"""Fact-counting human evaluation harness for clinical report summarization."""

from .agreement import (
    AlphaResult,
    ReliabilityData,
    agreement_report,
    coherence_distribution,
    krippendorff_alpha,
    pairwise_alpha,
)
from .corpus import (
    ClinicalReport,
    CorpusSplit,
    CorpusStats,
    corpus_stats,
    filter_by_reference_length,
    ingest_corpus,
    lead3,
    rouge_precision,
    stratified_split,
)
from .metrics import (
    CellAggregate,
    DerivedMetrics,
    RawCounts,
    aggregate_cell,
    aggregate_row,
    coherence_value,
    derive_metrics,
    validate_counts,
)
from .tasks import (
    AnnotationRecord,
    FactSpan,
    SystemOutput,
    TaskBundle,
    build_tasks,
    export_tasks,
    import_annotations,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaResult",
    "AnnotationRecord",
    "CellAggregate",
    "ClinicalReport",
    "CorpusSplit",
    "CorpusStats",
    "DerivedMetrics",
    "FactSpan",
    "RawCounts",
    "ReliabilityData",
    "SystemOutput",
    "TaskBundle",
    "agreement_report",
    "aggregate_cell",
    "aggregate_row",
    "build_tasks",
    "coherence_distribution",
    "coherence_value",
    "corpus_stats",
    "derive_metrics",
    "export_tasks",
    "filter_by_reference_length",
    "import_annotations",
    "ingest_corpus",
    "krippendorff_alpha",
    "lead3",
    "pairwise_alpha",
    "rouge_precision",
    "stratified_split",
    "validate_counts",
]

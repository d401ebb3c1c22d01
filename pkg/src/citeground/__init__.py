"""Citation-grounded summarization toolkit.

Tags source sentences with deterministic 8-hex identifiers, orchestrates
LLM summarization (single-pass or chunked), mechanically verifies inline
citations, filters by citation-distribution quality, and evaluates with a
five-criterion binary judge.
"""

__version__ = "0.1.0"

from .preprocess import (
    SourceDocument,
    TaggedSentence,
    TaggedDocument,
    normalize_whitespace,
    segment,
    make_tag,
    tag_document,
    strip_tags,
)
from .verify import CitationSpan, VerificationReport, extract_citations, verify_summary
from .dataset import SummaryRecord, DatasetStats, read_records, write_records, compute_stats

__all__ = [
    "SourceDocument",
    "TaggedSentence",
    "TaggedDocument",
    "normalize_whitespace",
    "segment",
    "make_tag",
    "tag_document",
    "strip_tags",
    "CitationSpan",
    "VerificationReport",
    "extract_citations",
    "verify_summary",
    "SummaryRecord",
    "DatasetStats",
    "read_records",
    "write_records",
    "compute_stats",
]

"""Training-record schema, JSONL IO, and dataset statistics.

Field names are frozen in docs/schema.md. Unknown extra fields on a
record survive a read/write round trip untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .quality import QualityReport
from .tokens import TokenCounter, approx_token_count
from .verify import VerificationReport

GENERATION_MODES = ("oneshot", "iterative")

_SCHEMA_FIELDS = (
    "doc_id",
    "tagged_source",
    "reasoning",
    "summary",
    "instruction",
    "instruction_category",
    "mode",
    "language",
    "quality",
    "verification",
)


@dataclass(frozen=True)
class SummaryRecord:
    doc_id: str
    tagged_source: str
    reasoning: str
    summary: str
    mode: str
    language: str
    instruction: Optional[str] = None
    instruction_category: str = "none"
    quality: Optional[QualityReport] = None
    verification: Optional[VerificationReport] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.summary:
            raise ValueError("summary must be non-empty")
        if self.mode not in GENERATION_MODES:
            raise ValueError(f"mode must be one of {GENERATION_MODES}, got {self.mode!r}")

    @property
    def exportable(self) -> bool:
        """Records that failed verification never enter a training file."""
        return self.verification is None or self.verification.passed

    def to_json(self) -> dict:
        obj = {
            "doc_id": self.doc_id,
            "tagged_source": self.tagged_source,
            "reasoning": self.reasoning,
            "summary": self.summary,
            "instruction": self.instruction,
            "instruction_category": self.instruction_category,
            "mode": self.mode,
            "language": self.language,
            "quality": self.quality.to_json() if self.quality else None,
            "verification": self.verification.to_json() if self.verification else None,
        }
        obj.update(self.extras)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "SummaryRecord":
        extras = {k: v for k, v in obj.items() if k not in _SCHEMA_FIELDS}
        return cls(
            doc_id=obj.get("doc_id", ""),
            tagged_source=obj.get("tagged_source", ""),
            reasoning=obj.get("reasoning", ""),
            summary=obj["summary"],
            instruction=obj.get("instruction"),
            instruction_category=obj.get("instruction_category", "none"),
            mode=obj["mode"],
            language=obj.get("language", ""),
            quality=QualityReport.from_json(obj["quality"]) if obj.get("quality") else None,
            verification=(
                VerificationReport.from_json(obj["verification"])
                if obj.get("verification")
                else None
            ),
            extras=extras,
        )


@dataclass(frozen=True)
class DatasetStats:
    total_examples: int
    avg_tokens: float
    pct_iterative: float
    pct_oneshot: float
    pct_with_instruction: float

    def to_json(self) -> dict:
        return {
            "total_examples": self.total_examples,
            "avg_tokens": self.avg_tokens,
            "pct_iterative": self.pct_iterative,
            "pct_oneshot": self.pct_oneshot,
            "pct_with_instruction": self.pct_with_instruction,
        }

    def render_text(self) -> str:
        lines = [
            f"{'Total Examples':<28}{self.total_examples:>12,}",
            f"{'Avg. Tokens':<28}{self.avg_tokens:>12,.1f}",
            "Generation Mode",
            f"{'  Iterative':<28}{self.pct_iterative:>11.1f}%",
            f"{'  Oneshot':<28}{self.pct_oneshot:>11.1f}%",
            f"{'With Custom Instruction':<28}{self.pct_with_instruction:>11.1f}%",
        ]
        return "\n".join(lines)


class RecordParseError(ValueError):
    def __init__(self, path, line_number: int, cause: Exception):
        self.line_number = line_number
        super().__init__(f"{path}: malformed record on line {line_number}: {cause}")


def write_records(records: Iterable[SummaryRecord], path: str | Path) -> int:
    """One JSON object per line, UTF-8. Returns the count written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_json(), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_records(path: str | Path) -> list[SummaryRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(SummaryRecord.from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise RecordParseError(path, i, exc) from exc
    return records


def export_records(records: Iterable[SummaryRecord], path: str | Path) -> int:
    """Write a training file, excluding records that failed verification."""
    return write_records((r for r in records if r.exportable), path)


def _pct(part: int, whole: int) -> float:
    if whole == 0:
        return 0.0
    return round(100 * part / whole, 1)


def compute_stats(
    records: list[SummaryRecord], counter: TokenCounter = approx_token_count
) -> DatasetStats:
    """Dataset composition report; percentages rounded to one decimal."""
    n = len(records)
    total_tokens = sum(counter(r.tagged_source) for r in records)
    return DatasetStats(
        total_examples=n,
        avg_tokens=round(total_tokens / n, 1) if n else 0.0,
        pct_iterative=_pct(sum(r.mode == "iterative" for r in records), n),
        pct_oneshot=_pct(sum(r.mode == "oneshot" for r in records), n),
        pct_with_instruction=_pct(sum(bool(r.instruction) for r in records), n),
    )

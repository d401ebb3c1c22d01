"""Citation-distribution scoring, percentile filtering, judge annotation,
and the first-person reasoning rewrite.

The evenness score is the complemented total-variation distance between
the citation gap distribution and the uniform one: with k citation
positions and the k+1 gaps g_i formed against the boundaries 0 and 1,
evenness = 1 - (1/2) * sum |g_i - 1/(k+1)|. It lives in [0,1] and equals
1.0 exactly when the gaps are uniform. This definition is recorded in
docs/schema.md so downstream consumers of QualityReport know it.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional

from .gateway import user_request
from .tokens import TokenCounter, approx_token_count
from .verify import extract_citations

if TYPE_CHECKING:
    from .dataset import SummaryRecord

log = logging.getLogger(__name__)

DEFAULT_PERCENTILE = 15
DEFAULT_GAP_THRESHOLD_TOKENS = 150


@dataclass(frozen=True)
class QualityReport:
    evenness: float
    max_gap_tokens: int
    positions: tuple[float, ...]
    judge_flags: dict = field(default_factory=dict)
    verdict: str = "keep"  # keep | drop
    drop_reason: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "evenness": self.evenness,
            "max_gap_tokens": self.max_gap_tokens,
            "positions": list(self.positions),
            "judge_flags": dict(self.judge_flags),
            "verdict": self.verdict,
            "drop_reason": self.drop_reason,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "QualityReport":
        return cls(
            evenness=obj["evenness"],
            max_gap_tokens=obj["max_gap_tokens"],
            positions=tuple(obj.get("positions", [])),
            judge_flags=dict(obj.get("judge_flags", {})),
            verdict=obj.get("verdict", "keep"),
            drop_reason=obj.get("drop_reason"),
        )


def citation_positions(
    summary: str, counter: TokenCounter = approx_token_count
) -> list[float]:
    """Fractional token position of each citation, sorted ascending."""
    total = counter(summary)
    if total <= 0:
        raise ValueError("summary token count must be positive")
    positions = [
        counter(summary[: span.char_offset]) / total
        for span in extract_citations(summary)
    ]
    return sorted(positions)


def _gaps(positions: list[float]) -> list[float]:
    bounds = [0.0, *positions, 1.0]
    return [b - a for a, b in zip(bounds, bounds[1:])]


def evenness(positions: list[float]) -> float:
    """Uniformity of citation spacing in [0,1]; 1.0 iff gaps are uniform."""
    if any(not 0.0 <= p <= 1.0 for p in positions):
        raise ValueError("positions must lie in [0,1]")
    if any(b < a for a, b in zip(positions, positions[1:])):
        raise ValueError("positions must be sorted ascending")
    if not positions:
        return 0.0
    ideal = 1.0 / (len(positions) + 1)
    tvd = 0.5 * sum(abs(g - ideal) for g in _gaps(positions))
    return 1.0 - tvd


def max_uncited_gap(positions: list[float], total_tokens: int) -> int:
    """Largest citation-free stretch, in tokens (boundary gaps included)."""
    if not positions:
        return total_tokens
    return round(max(_gaps(positions)) * total_tokens)


def percentile_filter(scores: list[float], percentile: float = DEFAULT_PERCENTILE) -> list[bool]:
    """Keep mask dropping scores strictly below the percentile threshold.

    Threshold is nearest-rank over the sorted scores; ties at the
    threshold are kept, so an all-equal input drops nothing.
    """
    if not scores:
        raise ValueError("scores must be non-empty")
    ordered = sorted(scores)
    k = min(math.ceil(percentile / 100 * len(scores)), len(scores) - 1)
    threshold = ordered[k]
    return [score >= threshold for score in scores]


_YES_NO_RE = re.compile(r"\s*(yes|no)\b", re.IGNORECASE)


def _parse_yes_no(content: str) -> Optional[bool]:
    m = _YES_NO_RE.match(content)
    if m is None:
        return None
    return m.group(1).lower() == "yes"


_JUDGE_QUESTIONS = {
    "coherence": (
        "Does the reasoning below coherently plan the summary that follows, "
        "with a clear structure and citation placement?"
    ),
    "specificity": (
        "Are the claims in the summary below specific and informative rather "
        "than generic filler?"
    ),
}


def annotate_quality(record: "SummaryRecord", gateway) -> dict:
    """One binary judge call per flag; unparseable answers count as False."""
    flags = {}
    for name, question in _JUDGE_QUESTIONS.items():
        prompt = (
            f"{question}\n\n"
            f"<reasoning>\n{record.reasoning}\n</reasoning>\n"
            f"<summary>\n{record.summary}\n</summary>\n\n"
            "Answer with a single word, yes or no."
        )
        response = gateway.chat(user_request(prompt))
        verdict = _parse_yes_no(response.content)
        if verdict is None:
            log.warning(
                "judge answer for %s flag was not yes/no: %r", name, response.content[:80]
            )
            verdict = False
        flags[name] = verdict
    return flags


_REWRITE_REASONING_RE = re.compile(r"<reasoning>\s*(.*?)\s*</reasoning>", re.DOTALL)
_REWRITE_SUMMARY_RE = re.compile(r"<summary>\s*(.*?)\s*</summary>", re.DOTALL)


def rewrite_first_person(record: "SummaryRecord", gateway) -> "SummaryRecord":
    """Rewrite the reasoning trace into first-person perspective.

    The summary must come back byte-identical; a changed summary rejects
    the rewrite and keeps the original record.
    """
    if not record.reasoning:
        return record
    prompt = (
        "Rewrite the reasoning below from third-person into first-person "
        "perspective (for example 'The summary should...' becomes 'I will...'). "
        "Keep the meaning, order, and level of detail unchanged. Return the "
        "summary exactly as given, byte for byte.\n\n"
        f"<reasoning>\n{record.reasoning}\n</reasoning>\n"
        f"<summary>\n{record.summary}\n</summary>\n\n"
        "Return your answer in the same <reasoning>/<summary> format."
    )
    response = gateway.chat(user_request(prompt))
    reasoning_m = _REWRITE_REASONING_RE.search(response.content)
    summary_m = _REWRITE_SUMMARY_RE.search(response.content)
    if reasoning_m is None:
        log.warning("rewrite response had no reasoning block; keeping original")
        return record
    new_summary = summary_m.group(1).strip() if summary_m else record.summary
    if new_summary != record.summary:
        log.warning("rewrite altered the summary text; keeping original record")
        return record
    return dataclasses.replace(record, reasoning=reasoning_m.group(1).strip())


def score_record(
    record: "SummaryRecord",
    counter: TokenCounter = approx_token_count,
    gap_threshold_tokens: int = DEFAULT_GAP_THRESHOLD_TOKENS,
) -> QualityReport:
    """Distribution scores for one record; drops on an excessive uncited gap.

    The percentile cut is batch-level and applied separately via
    percentile_filter.
    """
    total = counter(record.summary)
    positions = citation_positions(record.summary, counter) if total > 0 else []
    gap = max_uncited_gap(positions, total)
    verdict, reason = "keep", None
    if gap > gap_threshold_tokens:
        verdict, reason = "drop", f"max uncited gap {gap} tokens exceeds {gap_threshold_tokens}"
    return QualityReport(
        evenness=evenness(positions),
        max_gap_tokens=gap,
        positions=tuple(positions),
        verdict=verdict,
        drop_reason=reason,
    )

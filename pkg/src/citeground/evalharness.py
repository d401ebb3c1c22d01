"""Five-criterion binary LLM-as-judge evaluation with pass-rate aggregation.

Each sample is judged once per applicable criterion (instruction-following
only applies when the record carries an instruction). The overall score is
a per-check micro-average by default; a macro-average over per-criterion
rates is available behind a flag.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .gateway import user_request
from .preprocess import TaggedDocument

if TYPE_CHECKING:
    from .dataset import SummaryRecord

log = logging.getLogger(__name__)

CRITERIA = ("fact", "coverage", "specificity", "format", "instruction")

CRITERION_DEFINITIONS = {
    "fact": (
        "Does the summary avoid introducing new facts, entities, numbers, "
        "or claims not supported by the source content?"
    ),
    "coverage": (
        "Does the summary cover the document's main points and key "
        "takeaways at appropriate granularity?"
    ),
    "specificity": (
        "Are claims specific and informative rather than generic filler "
        '(e.g., "there are several points")?'
    ),
    "format": (
        "Is the output compliant with formatting instructions including "
        "language consistency, semantic-aware planning, and paragraph structure?"
    ),
    "instruction": (
        "If a custom instruction is provided, is it followed appropriately?"
    ),
}

CRITERION_LABELS = {
    "fact": "Fact",
    "coverage": "Cov.",
    "specificity": "Spec.",
    "format": "Fmt.",
    "instruction": "Instr.",
}


@dataclass(frozen=True)
class Verdict:
    passed: bool
    explanation: str


@dataclass(frozen=True)
class EvalResult:
    sample_id: str
    verdicts: dict  # criterion -> Verdict
    applicable: frozenset[str]

    def to_json(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "verdicts": {
                c: {"pass": v.passed, "explanation": v.explanation}
                for c, v in self.verdicts.items()
            },
            "applicable": sorted(self.applicable),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "EvalResult":
        return cls(
            sample_id=obj["sample_id"],
            verdicts={
                c: Verdict(v["pass"], v.get("explanation", ""))
                for c, v in obj["verdicts"].items()
            },
            applicable=frozenset(obj["applicable"]),
        )


@dataclass(frozen=True)
class EvalReport:
    per_criterion: dict  # criterion -> pass rate in [0,1]
    overall: float
    n_samples: int
    aggregation: str = "micro"

    def render_text(self) -> str:
        header = " ".join(f"{CRITERION_LABELS[c]:>7}" for c in CRITERIA) + f" {'All':>7}"
        cells = []
        for c in CRITERIA:
            rate = self.per_criterion.get(c)
            cells.append(f"{rate:>7.3f}" if rate is not None else f"{'-':>7}")
        row = " ".join(cells) + f" {self.overall:>7.3f}"
        return (
            f"n_samples: {self.n_samples}  aggregation: {self.aggregation}\n"
            f"{header}\n{row}"
        )

    def to_json(self) -> dict:
        return {
            "per_criterion": dict(self.per_criterion),
            "overall": self.overall,
            "n_samples": self.n_samples,
            "aggregation": self.aggregation,
        }


_YES_NO_RE = re.compile(r"\s*(yes|no)\b", re.IGNORECASE)


def _judge_prompt(criterion: str, record: "SummaryRecord", doc: TaggedDocument) -> str:
    parts = [
        "You are evaluating a citation-grounded summary against its source "
        "document. Judge only the criterion below.",
        f"Criterion: {CRITERION_DEFINITIONS[criterion]}",
        f"<source_text>\n{doc.serialize()}\n</source_text>",
    ]
    if record.instruction:
        parts.append(f"<custom_instruction>\n{record.instruction}\n</custom_instruction>")
    parts.append(f"<summary>\n{record.summary}\n</summary>")
    parts.append(
        "Answer yes or no on the first line, then a one-sentence explanation."
    )
    return "\n\n".join(parts)


def applicable_criteria(record: "SummaryRecord") -> frozenset[str]:
    criteria = set(CRITERIA)
    if not record.instruction:
        criteria.discard("instruction")
    return frozenset(criteria)


def judge_sample(record: "SummaryRecord", doc: TaggedDocument, gateway) -> EvalResult:
    """One judge request per applicable criterion; unparseable answers fail."""
    applicable = applicable_criteria(record)
    verdicts = {}
    for criterion in CRITERIA:
        if criterion not in applicable:
            continue
        response = gateway.chat(user_request(_judge_prompt(criterion, record, doc)))
        m = _YES_NO_RE.match(response.content)
        if m is None:
            log.warning(
                "judge answer for %s was not yes/no: %r", criterion, response.content[:80]
            )
            verdicts[criterion] = Verdict(False, response.content.strip()[:500])
        else:
            explanation = response.content[m.end() :].strip().lstrip(",.:;- ")
            verdicts[criterion] = Verdict(m.group(1).lower() == "yes", explanation)
    return EvalResult(sample_id=record.doc_id, verdicts=verdicts, applicable=applicable)


def aggregate(results: list[EvalResult], macro: bool = False) -> EvalReport:
    """Pass rates per criterion and overall.

    Micro (default): overall = total passes / total applicable checks.
    Macro: overall = mean of the per-criterion rates.
    """
    if not results:
        raise ValueError("cannot aggregate an empty result list")
    per_criterion = {}
    total_checks = 0
    total_passes = 0
    for criterion in CRITERIA:
        applicable = [r for r in results if criterion in r.applicable]
        if not applicable:
            continue
        passes = sum(r.verdicts[criterion].passed for r in applicable)
        per_criterion[criterion] = passes / len(applicable)
        total_checks += len(applicable)
        total_passes += passes
    if macro:
        overall = sum(per_criterion.values()) / len(per_criterion)
    else:
        overall = total_passes / total_checks
    return EvalReport(
        per_criterion=per_criterion,
        overall=overall,
        n_samples=len(results),
        aggregation="macro" if macro else "micro",
    )

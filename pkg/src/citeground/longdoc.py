"""Long-document orchestration: single-pass vs. chunked summarization.

Documents under the one-shot token limit are summarized in a single pass;
longer documents are split into sentence-aligned chunks, each chunk is
summarized independently, and the partial summaries are merged by a final
LLM call while keeping every citation valid against the full document.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .gateway import GatewayError, user_request
from .preprocess import TaggedDocument, TaggedSentence
from .tokens import TokenCounter, approx_token_count
from .verify import VerificationReport, verify_summary

log = logging.getLogger(__name__)

DEFAULT_MERGE_COVERAGE_RATIO = 0.8


class GenerationMode(str, Enum):
    ONESHOT = "oneshot"
    ITERATIVE = "iterative"


@dataclass(frozen=True)
class TokenBudget:
    oneshot_limit: int = 30_000
    chunk_target: int = 15_000
    context_limit: int = 100_000

    def __post_init__(self):
        if not (0 < self.chunk_target <= self.oneshot_limit <= self.context_limit):
            raise ValueError(
                "budget must satisfy 0 < chunk_target <= oneshot_limit <= context_limit"
            )


@dataclass(frozen=True)
class Chunk:
    sentences: tuple[TaggedSentence, ...]
    chunk_index: int
    token_count: int

    def serialize(self) -> str:
        return " ".join(s.serialize() for s in self.sentences)

    @property
    def tag_set(self) -> frozenset[str]:
        return frozenset(s.tag for s in self.sentences)


class ChunkSummarizationError(RuntimeError):
    """Gateway failure while summarizing one chunk."""

    def __init__(self, chunk_index: int, cause: Exception):
        self.chunk_index = chunk_index
        self.cause = cause
        super().__init__(f"chunk {chunk_index} failed: {cause}")


class VerificationFailedError(RuntimeError):
    """Generated summary did not pass citation verification."""

    def __init__(self, report: VerificationReport, record=None):
        self.report = report
        self.record = record
        super().__init__(
            "summary failed citation verification: "
            f"unknown={list(report.unknown_tags)} "
            f"duplicates={list(report.duplicate_tags)} "
            f"combined={list(report.combined_refs)} "
            f"missing={list(report.missing_required)}"
        )


def plan_chunks(
    doc: TaggedDocument,
    budget: TokenBudget = TokenBudget(),
    counter: TokenCounter = approx_token_count,
) -> tuple[GenerationMode, list[Chunk]]:
    """Pick the generation mode and the sentence-aligned chunking.

    Greedy first-fit in document order; a single sentence larger than the
    chunk target forms its own chunk rather than being split mid-sentence.
    """
    if not doc.sentences:
        raise ValueError("cannot plan chunks for an empty document")
    sentence_tokens = [counter(s.serialize()) for s in doc.sentences]
    total = sum(sentence_tokens)
    if total < budget.oneshot_limit:
        return GenerationMode.ONESHOT, [
            Chunk(sentences=doc.sentences, chunk_index=0, token_count=total)
        ]

    chunks: list[Chunk] = []
    current: list[TaggedSentence] = []
    current_tokens = 0
    for sentence, n_tokens in zip(doc.sentences, sentence_tokens):
        if current and current_tokens + n_tokens > budget.chunk_target:
            chunks.append(
                Chunk(tuple(current), chunk_index=len(chunks), token_count=current_tokens)
            )
            current, current_tokens = [], 0
        current.append(sentence)
        current_tokens += n_tokens
    chunks.append(Chunk(tuple(current), chunk_index=len(chunks), token_count=current_tokens))
    return GenerationMode.ITERATIVE, chunks


def _chunk_params(chunk: Chunk, language: str) -> "prompts.PromptParams":
    from . import prompts

    # chunk summaries target 300-600 words; aim mid-range for tag count
    n_tags = min(max(1, round(450 / 60)), len(chunk.tag_set))
    return prompts.PromptParams(word_count=450, number_of_xml_tags=max(1, n_tags), language=language)


def summarize_oneshot(
    doc: TaggedDocument,
    instruction: Optional[str],
    gateway,
    params,
    templates=None,
) -> "dataset.SummaryRecord":
    """Single-pass generation; raises VerificationFailedError on bad citations."""
    from . import dataset, prompts

    prompt = prompts.build_oneshot_prompt(doc, params, instruction, templates)
    response = gateway.chat(user_request(prompt, system=prompts.SYSTEM_PROMPT))
    output = prompts.parse_model_output(response.content)
    report = verify_summary(
        output.summary, doc, required_tags=list(output.xml_tags) or None
    )
    record = dataset.SummaryRecord(
        doc_id=doc.doc_id,
        tagged_source=doc.serialize(),
        reasoning=output.reasoning,
        summary=output.summary,
        instruction=instruction,
        mode=GenerationMode.ONESHOT.value,
        language=doc.language,
        verification=report,
    )
    if not report.passed:
        raise VerificationFailedError(report, record)
    return record


def summarize_iterative(
    doc: TaggedDocument,
    chunks: list[Chunk],
    instruction: Optional[str],
    gateway,
    params,
    templates=None,
    coverage_warn_ratio: float = DEFAULT_MERGE_COVERAGE_RATIO,
) -> "dataset.SummaryRecord":
    """Chunk-wise generation followed by an LLM merge of the partials.

    The merged summary must verify against the full document's tag set;
    a merged cited set covering less than `coverage_warn_ratio` of the
    partials' union only warns (the merge may drop redundant citations).
    """
    from . import dataset, prompts
    from .verify import extract_citations

    if not chunks:
        raise ValueError("iterative summarization needs at least one chunk")

    partials: list[str] = []
    partial_cited: set[str] = set()
    for chunk in sorted(chunks, key=lambda c: c.chunk_index):
        prompt = prompts.build_chunk_prompt(
            chunk, _chunk_params(chunk, params.language), templates
        )
        try:
            response = gateway.chat(user_request(prompt, system=prompts.SYSTEM_PROMPT))
        except GatewayError as exc:
            raise ChunkSummarizationError(chunk.chunk_index, exc) from exc
        output = prompts.parse_model_output(response.content)
        partials.append(output.summary)
        partial_cited.update(s.tag for s in extract_citations(output.summary))

    merge_prompt = prompts.build_merge_prompt(partials, params, instruction, templates)
    response = gateway.chat(user_request(merge_prompt, system=prompts.SYSTEM_PROMPT))
    output = prompts.parse_model_output(response.content)
    report = verify_summary(output.summary, doc)

    record = dataset.SummaryRecord(
        doc_id=doc.doc_id,
        tagged_source=doc.serialize(),
        reasoning=output.reasoning,
        summary=output.summary,
        instruction=instruction,
        mode=GenerationMode.ITERATIVE.value,
        language=doc.language,
        verification=report,
    )
    if not report.passed:
        raise VerificationFailedError(report, record)

    merged_cited = {s.tag for s in report.citations}
    if partial_cited and merged_cited < partial_cited:
        coverage = len(merged_cited) / len(partial_cited)
        if coverage < coverage_warn_ratio:
            log.warning(
                "merge kept %.0f%% of the partials' cited tags (%d of %d) for doc %r",
                100 * coverage, len(merged_cited), len(partial_cited), doc.doc_id,
            )
    return record

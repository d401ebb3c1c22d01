"""End-to-end run orchestration: tag, generate, verify, score, filter,
rewrite, export, with a run manifest recording seed, config hash, and
per-stage counts.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import prompts, quality
from .config import Config
from .dataset import SummaryRecord, write_records
from .gateway import GatewayError, user_request
from .longdoc import (
    ChunkSummarizationError,
    GenerationMode,
    VerificationFailedError,
    plan_chunks,
    summarize_iterative,
    summarize_oneshot,
)
from .preprocess import SUPPORTED_LANGUAGES, SourceDocument, tag_document

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_COMPLETED_WITH_FAILURES = 2

_INSTRUCTION_EXCERPT_CHARS = 2000
_SHORT_INSTRUCTION = "Summarize the text in at most 150 words."


class PipelineFatalError(RuntimeError):
    pass


@dataclass
class DocOutcome:
    doc_id: str
    record: Optional[SummaryRecord] = None  # verification-passed output
    generated: bool = False
    error: Optional[str] = None


def _doc_language(path: Path, default: str) -> str:
    suffix = path.stem.rsplit(".", 1)[-1]
    return suffix if suffix in SUPPORTED_LANGUAGES else default


def _pick_instruction(
    category: prompts.InstructionCategory,
    doc,
    rng: random.Random,
    gateway,
    templates,
) -> tuple[Optional[str], Optional[str]]:
    """(strict instruction used for generation, relaxed instruction stored)."""
    if category is prompts.InstructionCategory.NONE:
        return None, None
    if category is prompts.InstructionCategory.BULLETS:
        n = rng.randint(3, 8)
        strict = (
            f"Summarize in exactly {n} bullet points. "
            "Only bullets, no introduction or conclusion."
        )
    elif category is prompts.InstructionCategory.SHORT:
        strict = _SHORT_INSTRUCTION
    else:
        excerpt = " ".join(s.text for s in doc.sentences)[:_INSTRUCTION_EXCERPT_CHARS]
        prompt = prompts.build_instruction_gen_prompt(excerpt, doc.language, templates)
        response = gateway.chat(user_request(prompt))
        generated = prompts.parse_instruction_set(response.content, doc.language)
        pool = (
            generated.positives
            if category is prompts.InstructionCategory.POSITIVE
            else generated.adversarials
        )
        strict = pool[rng.randrange(len(pool))]
    return strict, prompts.relax_instruction(strict)


def _process_document(path: Path, config: Config, gateway, templates) -> DocOutcome:
    doc_id = path.stem
    outcome = DocOutcome(doc_id=doc_id)
    rng = random.Random(f"{config.pipeline.seed}:{doc_id}")
    try:
        language = _doc_language(path, config.pipeline.language)
        source = SourceDocument(
            raw_text=path.read_text(encoding="utf-8"), language=language, doc_id=doc_id
        )
        doc = tag_document(source)

        category = prompts.sample_instruction_category(rng)
        word_count = prompts.sample_word_count(rng, config.pipeline.word_counts)
        strict, relaxed = _pick_instruction(category, doc, rng, gateway, templates)

        params = prompts.PromptParams(
            word_count=word_count,
            number_of_xml_tags=prompts.choose_tag_count(doc, word_count),
            language=language,
        )
        mode, chunks = plan_chunks(doc, config.budget)
        try:
            if mode is GenerationMode.ONESHOT:
                record = summarize_oneshot(doc, strict, gateway, params, templates)
            else:
                record = summarize_iterative(doc, chunks, strict, gateway, params, templates)
        except VerificationFailedError as exc:
            outcome.generated = True
            outcome.error = f"verification failed: {exc}"
            log.warning("document %s: %s", doc_id, outcome.error)
            return outcome
        outcome.generated = True
        outcome.record = dataclasses.replace(
            record, instruction=relaxed, instruction_category=category.value
        )
    except (GatewayError, ChunkSummarizationError, OSError, ValueError) as exc:
        outcome.error = f"{exc.__class__.__name__}: {exc}"
        log.error("document %s failed: %s", doc_id, outcome.error)
    return outcome


def _apply_percentile(
    pairs: list[tuple[SummaryRecord, quality.QualityReport]],
    percentile: float,
    per_language: bool,
) -> list[tuple[SummaryRecord, quality.QualityReport]]:
    """Mark the bottom slice by evenness as dropped; returns updated pairs."""
    if not pairs:
        return pairs
    groups: dict[str, list[int]] = {}
    for i, (record, _) in enumerate(pairs):
        key = record.language if per_language else ""
        groups.setdefault(key, []).append(i)
    updated = list(pairs)
    for indices in groups.values():
        scores = [pairs[i][1].evenness for i in indices]
        mask = quality.percentile_filter(scores, percentile)
        for idx, keep in zip(indices, mask):
            record, report = updated[idx]
            if not keep and report.verdict == "keep":
                report = dataclasses.replace(
                    report,
                    verdict="drop",
                    drop_reason=f"evenness {report.evenness:.3f} in bottom "
                    f"{percentile:g}th percentile",
                )
                updated[idx] = (record, report)
    return updated


def run_pipeline(
    config: Config,
    input_dir: str | Path,
    output_path: str | Path,
    keep_going: bool = False,
) -> tuple[int, dict]:
    """Run the full pipeline over every .txt document in `input_dir`.

    Returns (exit_code, manifest). Verification failures are logged and
    reflected in the manifest; transport and IO failures abort the run
    unless keep_going is set.
    """
    input_dir = Path(input_dir)
    output_path = Path(output_path)
    doc_paths = sorted(input_dir.glob("*.txt"))
    if not doc_paths:
        raise PipelineFatalError(f"no .txt documents in {input_dir}")

    gateway = config.make_gateway()
    templates = (
        prompts.TemplateLibrary(config._resolve(config.pipeline.template_dir))
        if config.pipeline.template_dir
        else None
    )

    with ThreadPoolExecutor(max_workers=config.pipeline.workers) as pool:
        outcomes = list(
            pool.map(lambda p: _process_document(p, config, gateway, templates), doc_paths)
        )

    failures = [o for o in outcomes if o.error is not None and not o.generated]
    if failures and not keep_going:
        raise PipelineFatalError(
            f"document {failures[0].doc_id} failed: {failures[0].error} "
            "(use --keep-going to skip failing documents)"
        )

    generated = sum(o.generated for o in outcomes)
    passed_outcomes = [o for o in outcomes if o.record is not None]

    pairs = []
    for outcome in passed_outcomes:
        record = outcome.record
        report = quality.score_record(
            record, gap_threshold_tokens=config.pipeline.gap_threshold_tokens
        )
        flags = quality.annotate_quality(record, gateway)
        report = dataclasses.replace(report, judge_flags=flags)
        record = quality.rewrite_first_person(record, gateway)
        pairs.append((record, report))

    pairs = _apply_percentile(
        pairs, config.pipeline.percentile, config.pipeline.per_language_percentile
    )
    kept = [
        dataclasses.replace(record, quality=report)
        for record, report in pairs
        if report.verdict == "keep"
    ]
    write_records(kept, output_path)

    manifest = {
        "seed": config.pipeline.seed,
        "config_hash": config.config_hash,
        "counts": {
            "generated": generated,
            "verification_passed": len(passed_outcomes),
            "quality_kept": len(kept),
        },
        "documents": len(doc_paths),
        "failures": sorted(
            ({"doc_id": o.doc_id, "error": o.error} for o in outcomes if o.error),
            key=lambda entry: entry["doc_id"],
        ),
    }
    manifest_path = output_path.with_suffix(output_path.suffix + ".manifest.json")
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )

    exit_code = EXIT_COMPLETED_WITH_FAILURES if failures else EXIT_OK
    return exit_code, manifest

"""Prompt construction: the four prompt families, instruction-mix sampling,
and constraint relaxation for stored training instructions.

Templates live as plain text files with ``{name}`` placeholders under
``templates/<family>/<language>.txt`` (packaged defaults; a directory can
be supplied to override them). A missing language falls back to English
with a warning.
"""

from __future__ import annotations

import logging
import random
import re
import string
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Sequence

from .preprocess import TaggedDocument

if TYPE_CHECKING:
    from .longdoc import Chunk

log = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You are a summarization assistant that produces citation-grounded "
    "summaries with inline source references."
)

LANGUAGE_NAMES = {
    "de": "German",
    "en": "English",
    "fr": "French",
    "it": "Italian",
    "es": "Spanish",
}

DEFAULT_WORD_COUNTS = (200, 300, 400, 600)


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptParams:
    word_count: int
    number_of_xml_tags: int
    language: str

    def __post_init__(self):
        if self.word_count <= 0:
            raise ValueError("word_count must be positive")
        if self.number_of_xml_tags < 1:
            raise ValueError("number_of_xml_tags must be >= 1")


class InstructionCategory(str, Enum):
    NONE = "none"
    POSITIVE = "positive"
    ADVERSARIAL = "adversarial"
    BULLETS = "bullets"
    SHORT = "short"


# training mix: 30% uninstructed, 40% positive, 10% each for the rest
CATEGORY_WEIGHTS: tuple[tuple[InstructionCategory, float], ...] = (
    (InstructionCategory.NONE, 0.30),
    (InstructionCategory.POSITIVE, 0.40),
    (InstructionCategory.ADVERSARIAL, 0.10),
    (InstructionCategory.BULLETS, 0.10),
    (InstructionCategory.SHORT, 0.10),
)


@dataclass(frozen=True)
class GeneratedInstructionSet:
    positives: tuple[str, str, str]
    adversarials: tuple[str, str, str]
    language: str


class TemplateLibrary:
    """Loads and renders the prompt template files."""

    def __init__(self, directory: Optional[str | Path] = None):
        self.directory = Path(directory) if directory else None

    @lru_cache(maxsize=None)
    def _load(self, family: str, language: str) -> str:
        for lang in (language, "en"):
            if self.directory is not None:
                path = self.directory / family / f"{lang}.txt"
                if path.is_file():
                    if lang != language:
                        log.warning(
                            "no %s template for language %r, falling back to English",
                            family, language,
                        )
                    return path.read_text(encoding="utf-8")
            else:
                ref = resources.files("citeground").joinpath(f"templates/{family}/{lang}.txt")
                if ref.is_file():
                    if lang != language:
                        log.warning(
                            "no %s template for language %r, falling back to English",
                            family, language,
                        )
                    return ref.read_text(encoding="utf-8")
        raise TemplateError(f"no template for family {family!r}")

    def render(self, family: str, language: str, /, **bindings) -> str:
        template = self._load(family, language)
        for _, name, _, _ in string.Formatter().parse(template):
            if name and name not in bindings:
                raise TemplateError(f"unbound placeholder {{{name}}} in {family} template")
        return template.format(**bindings)


_DEFAULT_LIBRARY = TemplateLibrary()


def _display_language(code_or_name: str) -> str:
    return LANGUAGE_NAMES.get(code_or_name, code_or_name)


def _instruction_block(instruction: Optional[str]) -> str:
    if not instruction:
        return ""
    return f"\n# Custom Instruction\n{instruction}\n"


def build_oneshot_prompt(
    doc: TaggedDocument,
    params: PromptParams,
    instruction: Optional[str] = None,
    templates: Optional[TemplateLibrary] = None,
) -> str:
    lib = templates or _DEFAULT_LIBRARY
    return lib.render(
        "oneshot",
        params.language,
        tagged_document=doc.serialize(),
        word_count=params.word_count,
        number_of_xml_tags=params.number_of_xml_tags,
        language=_display_language(params.language),
        instruction_block=_instruction_block(instruction),
    )


def build_chunk_prompt(
    chunk: "Chunk",
    params: PromptParams,
    templates: Optional[TemplateLibrary] = None,
) -> str:
    lib = templates or _DEFAULT_LIBRARY
    tagged = " ".join(s.serialize() for s in chunk.sentences)
    return lib.render(
        "chunk",
        params.language,
        tagged_chunk=tagged,
        number_of_xml_tags=params.number_of_xml_tags,
        language=_display_language(params.language),
    )


def build_merge_prompt(
    partials: Sequence[str],
    params: PromptParams,
    instruction: Optional[str] = None,
    templates: Optional[TemplateLibrary] = None,
) -> str:
    if not partials:
        raise ValueError("merge needs at least one partial summary")
    lib = templates or _DEFAULT_LIBRARY
    labeled = "\n\n".join(
        f"## Part {i + 1}\n{part}" for i, part in enumerate(partials)
    )
    return lib.render(
        "merge",
        params.language,
        partial_summaries=labeled,
        word_count=params.word_count,
        language=_display_language(params.language),
        instruction_block=_instruction_block(instruction),
    )


def build_instruction_gen_prompt(
    doc_excerpt: str,
    language: str,
    templates: Optional[TemplateLibrary] = None,
) -> str:
    if not doc_excerpt.strip():
        raise ValueError("document excerpt must be non-empty")
    lib = templates or _DEFAULT_LIBRARY
    return lib.render(
        "instruction_gen",
        language,
        doc_excerpt=doc_excerpt,
        language=_display_language(language),
    )


def sample_instruction_category(rng: random.Random) -> InstructionCategory:
    """One category draw with the fixed training-mix weights."""
    roll = rng.random()
    cumulative = 0.0
    for category, weight in CATEGORY_WEIGHTS:
        cumulative += weight
        if roll < cumulative:
            return category
    return CATEGORY_WEIGHTS[-1][0]


def sample_word_count(rng: random.Random, choices: Sequence[int] = DEFAULT_WORD_COUNTS) -> int:
    return rng.choice(list(choices))


# strict -> relaxed mapping: rigidity clauses stripped before an
# instruction is stored on a training record
_RELAX_RULES: tuple[tuple[re.Pattern, str], ...] = (
    (re.compile(r"(?i)(summarize in) exactly\s+"), r"\1 "),
    (re.compile(r"\s*Only bullets, no introduction or conclusion\."), ""),
)


def relax_instruction(strict: str) -> str:
    """Strip rigidity clauses; instructions with no mapped clause pass through."""
    relaxed = strict
    for pattern, replacement in _RELAX_RULES:
        relaxed = pattern.sub(replacement, relaxed)
    return relaxed


def choose_tag_count(doc: TaggedDocument, word_count: int) -> int:
    """Citation-count heuristic: about one citation per 60 words, clamped
    to [4, 30] and never more than the document has distinct tags."""
    if word_count <= 0:
        raise ValueError("word_count must be positive")
    count = max(4, min(30, round(word_count / 60)))
    return min(count, len(doc.tag_set))


@dataclass(frozen=True)
class ModelOutput:
    xml_tags: tuple[str, ...]
    reasoning: str
    summary: str


_XML_TAGS_BLOCK_RE = re.compile(r"<xml_tags>\s*(.*?)\s*</xml_tags>", re.DOTALL)
_REASONING_BLOCK_RE = re.compile(r"<reasoning>\s*(.*?)\s*</reasoning>", re.DOTALL)
_SUMMARY_BLOCK_RE = re.compile(r"<summary>\s*(.*?)\s*</summary>", re.DOTALL)
_HEX_TAG_RE = re.compile(r"<([0-9a-f]{8})>")


def parse_model_output(content: str) -> ModelOutput:
    """Split a generation response into tag list, reasoning, and summary.

    Responses without the block markers are treated as a bare summary.
    """
    tags_m = _XML_TAGS_BLOCK_RE.search(content)
    reasoning_m = _REASONING_BLOCK_RE.search(content)
    summary_m = _SUMMARY_BLOCK_RE.search(content)
    tags = tuple(dict.fromkeys(_HEX_TAG_RE.findall(tags_m.group(1)))) if tags_m else ()
    reasoning = reasoning_m.group(1).strip() if reasoning_m else ""
    summary = summary_m.group(1).strip() if summary_m else content.strip()
    return ModelOutput(xml_tags=tags, reasoning=reasoning, summary=summary)


_NUMBERED_LINE_RE = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")


def parse_instruction_set(content: str, language: str) -> GeneratedInstructionSet:
    """Parse the 6 numbered instructions (3 positive, then 3 adversarial)."""
    lines = [m.group(1) for m in map(_NUMBERED_LINE_RE.match, content.splitlines()) if m]
    if len(lines) < 6:
        raise ValueError(f"expected 6 numbered instructions, found {len(lines)}")
    return GeneratedInstructionSet(
        positives=(lines[0], lines[1], lines[2]),
        adversarials=(lines[3], lines[4], lines[5]),
        language=language,
    )

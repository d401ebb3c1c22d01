"""Sentence segmentation, whitespace normalization, and deterministic tagging.

Each source sentence gets an 8-character lowercase hex identifier (first 8
hex chars of the MD5 digest of its UTF-8 bytes) and is serialized as
``<tag>text</tag>``. Tags are deterministic and language-agnostic, so the
same sentence always carries the same tag.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

SUPPORTED_LANGUAGES = ("de", "en", "fr", "it", "es")

TAG_RE = re.compile(r"^[0-9a-f]{8}$")

# terminator run followed by whitespace (or end of block, handled separately)
_TERMINATOR_RE = re.compile(r"[.!?]+(?=\s)")
_ENUM_MARKER_RE = re.compile(r"^\(?\d{1,3}\.$")
_INITIAL_RE = re.compile(r"^[A-Za-zÀ-ÖØ-öø-ÿ]\.$")


class UnsupportedLanguageError(ValueError):
    """Raised for a language code outside the supported set."""


class TagCollisionError(RuntimeError):
    """Two distinct sentence texts collided on the same 8-hex tag prefix."""

    def __init__(self, tag: str, first: str, second: str):
        self.tag = tag
        self.first = first
        self.second = second
        super().__init__(
            f"tag prefix collision on {tag!r} between {first!r} and {second!r}"
        )


class TagParseError(ValueError):
    """Malformed or unbalanced tag markup."""

    def __init__(self, message: str, byte_offset: int):
        self.byte_offset = byte_offset
        super().__init__(f"{message} (byte offset {byte_offset})")


@dataclass(frozen=True)
class SourceDocument:
    raw_text: str
    language: str
    doc_id: str = ""

    def __post_init__(self):
        if self.language not in SUPPORTED_LANGUAGES:
            raise UnsupportedLanguageError(
                f"unsupported language code: {self.language!r} "
                f"(supported: {', '.join(SUPPORTED_LANGUAGES)})"
            )


@dataclass(frozen=True)
class TaggedSentence:
    tag: str
    text: str
    index: int

    def serialize(self) -> str:
        return f"<{self.tag}>{self.text}</{self.tag}>"


@dataclass(frozen=True)
class TaggedDocument:
    sentences: tuple[TaggedSentence, ...]
    language: str
    doc_id: str = ""
    tag_set: frozenset[str] = field(default=frozenset())

    def serialize(self) -> str:
        """Wrapped sentences in order, single space between them."""
        return " ".join(s.serialize() for s in self.sentences)

    def resolve(self, tag: str) -> TaggedSentence:
        """First sentence carrying `tag` (duplicates share one tag)."""
        for s in self.sentences:
            if s.tag == tag:
                return s
        raise KeyError(tag)


def normalize_whitespace(text: str) -> str:
    """Collapse space/tab runs to one space and line-break runs to one newline.

    Idempotent; strips leading and trailing whitespace.
    """
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    text = re.sub(r"[ \t]+", " ", text)
    text = re.sub(r"\n(?:[ \t]*\n)+", "\n", text)
    return text.strip()


@lru_cache(maxsize=None)
def _abbreviations(language: str) -> frozenset[str]:
    data = resources.files("citeground").joinpath(
        f"data/abbreviations/{language}.txt"
    ).read_text(encoding="utf-8")
    entries = set()
    for line in data.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.add(line)
    return frozenset(entries)


def _protected(token: str, abbreviations: frozenset[str]) -> bool:
    """No sentence split directly after this token."""
    # strip leading quotes/brackets so "(Dr." still matches "Dr."
    token = token.lstrip("\"'«»„“”‚‘’([{")
    if token in abbreviations:
        return True
    if _ENUM_MARKER_RE.match(token):
        # enumeration marker like "1." opens the following sentence
        return True
    if _INITIAL_RE.match(token):
        # single-letter initials ("F. M. Last") and letter enumerators
        return True
    return False


def _segment_block(block: str, abbreviations: frozenset[str]) -> list[str]:
    sentences = []
    start = 0
    for m in _TERMINATOR_RE.finditer(block):
        end = m.end()
        before = block[start:end]
        word = re.search(r"(\S+)$", before)
        if word and _protected(word.group(1), abbreviations):
            continue
        # prefer under-splitting: never split before a lowercase continuation
        rest = block[end:].lstrip()
        if rest and rest[0].islower():
            continue
        sentence = before.strip()
        if sentence:
            sentences.append(sentence)
        start = end
    tail = block[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def segment(text: str, language: str) -> list[str]:
    """Split normalized text into sentences.

    Protected abbreviations (per-language lists) and enumeration markers
    ("1.", "a)") never end a sentence; newlines always do.
    """
    if language not in SUPPORTED_LANGUAGES:
        raise UnsupportedLanguageError(
            f"unsupported language code: {language!r} "
            f"(supported: {', '.join(SUPPORTED_LANGUAGES)})"
        )
    abbreviations = _abbreviations(language)
    sentences: list[str] = []
    for block in text.split("\n"):
        sentences.extend(_segment_block(block, abbreviations))
    return sentences


def make_tag(sentence: str) -> str:
    """First 8 hex chars of the lowercase MD5 digest of the UTF-8 bytes."""
    if not sentence:
        raise ValueError("cannot tag an empty sentence")
    return hashlib.md5(sentence.encode("utf-8")).hexdigest()[:8]


def tag_document(doc: SourceDocument) -> TaggedDocument:
    """Normalize, segment, and tag every sentence of `doc`.

    Duplicate sentences share one tag. Distinct texts colliding on the
    8-hex prefix abort with TagCollisionError rather than being silently
    disambiguated.
    """
    normalized = normalize_whitespace(doc.raw_text)
    if not normalized:
        raise ValueError(f"document {doc.doc_id!r} is empty after normalization")
    seen: dict[str, str] = {}
    tagged = []
    for i, sentence in enumerate(segment(normalized, doc.language)):
        tag = make_tag(sentence)
        prior = seen.get(tag)
        if prior is not None and prior != sentence:
            raise TagCollisionError(tag, prior, sentence)
        seen[tag] = sentence
        tagged.append(TaggedSentence(tag=tag, text=sentence, index=i))
    return TaggedDocument(
        sentences=tuple(tagged),
        language=doc.language,
        doc_id=doc.doc_id,
        tag_set=frozenset(seen),
    )


def _parse_wrapped(tagged_text: str) -> list[tuple[str, str]]:
    def byte_offset(pos: int) -> int:
        return len(tagged_text[:pos].encode("utf-8"))

    pairs = []
    pos = 0
    n = len(tagged_text)
    while pos < n:
        if tagged_text[pos] != "<":
            raise TagParseError("expected opening tag", byte_offset(pos))
        close = tagged_text.find(">", pos)
        if close == -1:
            raise TagParseError("unterminated opening tag", byte_offset(pos))
        tag = tagged_text[pos + 1 : close]
        if not TAG_RE.match(tag):
            raise TagParseError(f"invalid tag {tag!r}", byte_offset(pos))
        closing = f"</{tag}>"
        end = tagged_text.find(closing, close + 1)
        if end == -1:
            raise TagParseError(f"unclosed tag {tag!r}", byte_offset(pos))
        pairs.append((tag, tagged_text[close + 1 : end]))
        pos = end + len(closing)
        if pos < n:
            if tagged_text[pos] != " ":
                raise TagParseError("expected single space between sentences", byte_offset(pos))
            pos += 1
    return pairs


def strip_tags(tagged_text: str) -> str:
    """Inverse of TaggedDocument.serialize: sentence texts joined by spaces.

    Raises TagParseError (with the byte offset) on malformed markup.
    """
    return " ".join(text for _, text in _parse_wrapped(tagged_text))


def parse_tagged_document(
    tagged_text: str, language: str = "de", doc_id: str = ""
) -> TaggedDocument:
    """Rebuild a TaggedDocument from its serialized ``<tag>text</tag>`` form."""
    if language not in SUPPORTED_LANGUAGES:
        raise UnsupportedLanguageError(f"unsupported language code: {language!r}")
    pairs = _parse_wrapped(tagged_text.strip())
    sentences = tuple(
        TaggedSentence(tag=tag, text=text, index=i) for i, (tag, text) in enumerate(pairs)
    )
    return TaggedDocument(
        sentences=sentences,
        language=language,
        doc_id=doc_id,
        tag_set=frozenset(tag for tag, _ in pairs),
    )

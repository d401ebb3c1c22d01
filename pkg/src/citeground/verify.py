"""Mechanical verification of inline citations against a tagged source.

Citations look like ``[<a3f5e823>]`` immediately after the claim they
support. Only 8-hex tokens count; HTML formatting tags (``<b>``, ``<i>``)
are ignored. Bare ``<hash>`` tokens outside brackets are reported
informationally but do not affect the verdict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .preprocess import TaggedDocument

# one bracket group holding one or more hex tags, e.g. [<aa..>] or [<aa..> <bb..>]
_BRACKET_GROUP_RE = re.compile(r"\[(?:\s*<[0-9a-f]{8}>)+\s*\]")
_HEX_TOKEN_RE = re.compile(r"<([0-9a-f]{8})>")


@dataclass(frozen=True)
class CitationSpan:
    tag: str
    char_offset: int
    raw: str


@dataclass(frozen=True)
class VerificationReport:
    citations: tuple[CitationSpan, ...]
    unknown_tags: tuple[str, ...]
    duplicate_tags: tuple[str, ...]
    combined_refs: tuple[int, ...]  # char offsets of the second span of each pair
    missing_required: tuple[str, ...]
    bare_tags: tuple[str, ...] = ()  # informational: <hash> outside brackets
    passed: bool = field(default=False)

    def to_json(self) -> dict:
        return {
            "citations": [
                {"tag": c.tag, "char_offset": c.char_offset, "raw": c.raw}
                for c in self.citations
            ],
            "unknown_tags": list(self.unknown_tags),
            "duplicate_tags": list(self.duplicate_tags),
            "combined_refs": list(self.combined_refs),
            "missing_required": list(self.missing_required),
            "bare_tags": list(self.bare_tags),
            "passed": self.passed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VerificationReport":
        return cls(
            citations=tuple(
                CitationSpan(c["tag"], c["char_offset"], c["raw"])
                for c in obj.get("citations", [])
            ),
            unknown_tags=tuple(obj.get("unknown_tags", [])),
            duplicate_tags=tuple(obj.get("duplicate_tags", [])),
            combined_refs=tuple(obj.get("combined_refs", [])),
            missing_required=tuple(obj.get("missing_required", [])),
            bare_tags=tuple(obj.get("bare_tags", [])),
            passed=obj.get("passed", False),
        )


def _bracket_groups(summary: str) -> list[tuple[int, int, list[CitationSpan]]]:
    groups = []
    for m in _BRACKET_GROUP_RE.finditer(summary):
        tokens = list(_HEX_TOKEN_RE.finditer(m.group(0)))
        if len(tokens) == 1:
            spans = [CitationSpan(tokens[0].group(1), m.start(), m.group(0))]
        else:
            spans = [
                CitationSpan(t.group(1), m.start() + t.start(), t.group(0))
                for t in tokens
            ]
        groups.append((m.start(), m.end(), spans))
    return groups


def extract_citations(summary: str, source_tags: frozenset[str] | set[str] | None = None) -> list[CitationSpan]:
    """Every bracketed 8-hex citation, in order of appearance.

    Tags absent from `source_tags` are still extracted; verify_summary
    flags them as unknown. Extraction is total and never raises.
    """
    spans: list[CitationSpan] = []
    for _, _, group_spans in _bracket_groups(summary):
        spans.extend(group_spans)
    return spans


def _bare_tags(summary: str) -> tuple[str, ...]:
    ranges = [(start, end) for start, end, _ in _bracket_groups(summary)]
    bare = []
    for token in _HEX_TOKEN_RE.finditer(summary):
        if not any(start <= token.start() < end for start, end in ranges):
            bare.append(token.group(1))
    return tuple(bare)


def _combined_refs(summary: str) -> tuple[int, ...]:
    """Offsets of citations adjacent to a preceding citation.

    Adjacent means within one bracket group, or across two groups
    separated by at most one whitespace character.
    """
    offsets: list[int] = []
    groups = _bracket_groups(summary)
    for _, _, spans in groups:
        offsets.extend(s.char_offset for s in spans[1:])
    for (_, prev_end, _), (cur_start, _, cur_spans) in zip(groups, groups[1:]):
        between = summary[prev_end:cur_start]
        if len(between) <= 1 and between.strip() == "":
            offsets.append(cur_spans[0].char_offset)
    return tuple(sorted(offsets))


def verify_summary(
    summary: str,
    doc: TaggedDocument,
    required_tags: list[str] | None = None,
) -> VerificationReport:
    """Check every inline citation of `summary` against `doc`.

    Failures are encoded in the report, never raised: unknown tags,
    duplicate citations, combined (adjacent) references, and required
    tags that were never cited.
    """
    spans = extract_citations(summary, doc.tag_set)
    counts: dict[str, int] = {}
    for s in spans:
        counts[s.tag] = counts.get(s.tag, 0) + 1
    cited = list(dict.fromkeys(s.tag for s in spans))

    unknown = tuple(t for t in cited if t not in doc.tag_set)
    duplicates = tuple(t for t in cited if counts[t] > 1)
    combined = _combined_refs(summary)
    missing = tuple(t for t in (required_tags or []) if t not in counts)
    passed = not (unknown or duplicates or combined or missing)
    return VerificationReport(
        citations=tuple(spans),
        unknown_tags=unknown,
        duplicate_tags=duplicates,
        combined_refs=combined,
        missing_required=missing,
        bare_tags=_bare_tags(summary),
        passed=passed,
    )

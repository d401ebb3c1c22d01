"""Human-readable annotated output: the summary with its citation markers
plus a resolved source-citation section, as text, Markdown, or static HTML.
"""

from __future__ import annotations

import html as html_mod
import re
from typing import TYPE_CHECKING

from .preprocess import TaggedDocument
from .verify import extract_citations

if TYPE_CHECKING:
    from .dataset import SummaryRecord

FORMATS = ("text", "markdown", "html")


class RenderError(ValueError):
    pass


def _cited_tags_in_order(summary: str) -> list[str]:
    return list(dict.fromkeys(s.tag for s in extract_citations(summary)))


def render_annotated(record: "SummaryRecord", doc: TaggedDocument, format: str = "text") -> str:
    """Summary plus a trailing section pairing each cited tag with its
    source sentence, ordered by first citation occurrence.

    Tags not present in the document are a render error; for duplicated
    sentences the first occurrence resolves the tag.
    """
    if format not in FORMATS:
        raise RenderError(f"unknown format {format!r}; expected one of {FORMATS}")
    cited = _cited_tags_in_order(record.summary)
    for tag in cited:
        if tag not in doc.tag_set:
            raise RenderError(f"cited tag {tag!r} does not exist in the source document")
    resolved = [(tag, doc.resolve(tag).text) for tag in cited]

    if format == "text":
        lines = [record.summary, "", "View Source Citations:"]
        if resolved:
            lines.extend(f"<{tag}> {text}" for tag, text in resolved)
        else:
            lines.append("(no citations in this summary)")
        return "\n".join(lines) + "\n"

    if format == "markdown":
        lines = [record.summary, "", "## View Source Citations", ""]
        if resolved:
            lines.extend(f"- `<{tag}>` {text}" for tag, text in resolved)
        else:
            lines.append("*(no citations in this summary)*")
        return "\n".join(lines) + "\n"

    return _render_html(record.summary, resolved)


def _render_html(summary: str, resolved: list[tuple[str, str]]) -> str:
    # each inline marker links to its entry in the citation section
    escaped = html_mod.escape(summary)
    for tag, _ in resolved:
        marker = html_mod.escape(f"[<{tag}>]")
        escaped = escaped.replace(
            marker, f'<a class="cite" href="#src-{tag}">{marker}</a>'
        )
    if resolved:
        items = "\n".join(
            f'<li id="src-{tag}"><code>&lt;{tag}&gt;</code> {html_mod.escape(text)}</li>'
            for tag, text in resolved
        )
        section = f"<ol class=\"sources\">\n{items}\n</ol>"
    else:
        section = "<p><em>(no citations in this summary)</em></p>"
    summary_html = "".join(
        f"<p>{para}</p>" for para in re.split(r"\n{2,}", escaped)
    )
    return (
        "<!DOCTYPE html>\n"
        '<html><head><meta charset="utf-8"><title>Annotated Summary</title>\n'
        "<style>body{font-family:sans-serif;max-width:48rem;margin:2rem auto;}"
        "a.cite{text-decoration:none;}</style></head>\n"
        "<body>\n"
        f"<div class=\"summary\">{summary_html}</div>\n"
        "<h2>View Source Citations</h2>\n"
        f"{section}\n"
        "</body></html>\n"
    )

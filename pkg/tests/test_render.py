import re

import pytest

from citeground.dataset import SummaryRecord
from citeground.render import RenderError, render_annotated

from conftest import build_doc


@pytest.fixture
def doc():
    return build_doc(
        [
            "The budget grew by ten percent.",
            "The council approved the plan.",
            "Two schools will be renovated.",
        ],
        language="en",
    )


def record_for(doc, tags, mode="oneshot"):
    summary = " ".join(f"Claim {i} [<{t}>]." for i, t in enumerate(tags))
    return SummaryRecord(
        doc_id=doc.doc_id or "doc",
        tagged_source=doc.serialize(),
        reasoning="",
        summary=summary,
        mode=mode,
        language="en",
    )


def tags_in_doc_order(doc):
    return [s.tag for s in doc.sentences]


class TestTextFormat:
    def test_citation_pairing(self, doc):
        ts = tags_in_doc_order(doc)
        out = render_annotated(record_for(doc, ts[:2]), doc, "text")
        assert "View Source Citations:" in out
        assert f"<{ts[0]}> The budget grew by ten percent." in out
        assert f"<{ts[1]}> The council approved the plan." in out

    def test_first_citation_order_not_document_order(self, doc):
        ts = tags_in_doc_order(doc)
        out = render_annotated(record_for(doc, [ts[2], ts[0]]), doc, "text")
        assert out.index(f"<{ts[2]}>") < out.index(f"<{ts[0]}>")

    def test_repeat_citation_listed_once(self, doc):
        ts = tags_in_doc_order(doc)
        record = record_for(doc, [ts[0], ts[0]])
        out = render_annotated(record, doc, "text")
        _, _, section = out.partition("View Source Citations:")
        assert section.count(f"<{ts[0]}>") == 1

    def test_zero_citation_notice(self, doc):
        record = SummaryRecord(
            doc_id="d", tagged_source=doc.serialize(), reasoning="",
            summary="No citations at all.", mode="oneshot", language="en",
        )
        out = render_annotated(record, doc, "text")
        assert "(no citations in this summary)" in out

    def test_unknown_tag_is_error(self, doc):
        record = record_for(doc, ["ffffffff"])
        with pytest.raises(RenderError, match="ffffffff"):
            render_annotated(record, doc, "text")

    def test_unknown_format_is_error(self, doc):
        ts = tags_in_doc_order(doc)
        with pytest.raises(RenderError):
            render_annotated(record_for(doc, ts[:1]), doc, "pdf")

    def test_purity(self, doc):
        ts = tags_in_doc_order(doc)
        record = record_for(doc, ts)
        first = render_annotated(record, doc, "text")
        second = render_annotated(record, doc, "text")
        assert first == second
        assert record.summary in first  # summary text untouched


class TestMarkdownFormat:
    def test_heading_and_bullets(self, doc):
        ts = tags_in_doc_order(doc)
        out = render_annotated(record_for(doc, ts[:2]), doc, "markdown")
        assert "## View Source Citations" in out
        assert f"- `<{ts[0]}>` The budget grew by ten percent." in out


class TestHtmlFormat:
    def test_anchor_bijection(self, doc):
        ts = tags_in_doc_order(doc)
        out = render_annotated(record_for(doc, ts), doc, "html")
        hrefs = re.findall(r'href="#src-([0-9a-f]{8})"', out)
        ids = re.findall(r'id="src-([0-9a-f]{8})"', out)
        assert sorted(hrefs) == sorted(ids) == sorted(ts)

    def test_self_contained_document(self, doc):
        ts = tags_in_doc_order(doc)
        out = render_annotated(record_for(doc, ts[:1]), doc, "html")
        assert out.startswith("<!DOCTYPE html>")
        assert "</html>" in out
        assert "<script" not in out
        assert 'href="http' not in out

    def test_source_text_escaped(self):
        doc = build_doc(["Costs <b>rose</b> by 5 % & more."], language="en")
        tag = doc.sentences[0].tag
        out = render_annotated(record_for(doc, [tag]), doc, "html")
        assert "&lt;b&gt;rose&lt;/b&gt;" in out
        assert "&amp; more" in out

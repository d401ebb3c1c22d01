import pytest

from citeground.preprocess import TaggedDocument, TaggedSentence, make_tag


def build_doc(sentences, language="de", doc_id="doc"):
    """TaggedDocument straight from sentence texts, bypassing segmentation."""
    tagged = tuple(
        TaggedSentence(tag=make_tag(s), text=s, index=i) for i, s in enumerate(sentences)
    )
    return TaggedDocument(
        sentences=tagged,
        language=language,
        doc_id=doc_id,
        tag_set=frozenset(s.tag for s in tagged),
    )


@pytest.fixture
def small_doc():
    return build_doc(
        [
            "The budget was approved.",
            "Infrastructure investments will increase by 12%.",
            "Minister Schmidt stated that sustainability remains a priority.",
            "The opposition criticized the plan.",
        ],
        language="en",
    )

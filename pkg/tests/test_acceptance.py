"""Release acceptance suite.

One test per shipping criterion; each prints a single PASS/FAIL line on
the real stdout so the verdicts are visible in captured pytest runs.
"""

import contextlib
import dataclasses
import hashlib
import json
import random
import re
import subprocess
import sys
import textwrap
import time

import pytest

from citeground.dataset import SummaryRecord, compute_stats, read_records
from citeground.evalharness import EvalResult, Verdict, aggregate
from citeground.longdoc import GenerationMode, TokenBudget, plan_chunks
from citeground.pipeline import run_pipeline
from citeground.preprocess import (
    SourceDocument,
    make_tag,
    normalize_whitespace,
    segment,
    strip_tags,
    tag_document,
)
from citeground.prompts import (
    CATEGORY_WEIGHTS,
    relax_instruction,
    sample_instruction_category,
)
from citeground.quality import evenness, percentile_filter
from citeground.verify import verify_summary

from conftest import build_doc


@contextlib.contextmanager
def verdict_line(number, name):
    try:
        yield
    except BaseException:
        print(f"[acceptance] {number:>2} {name}: FAIL", file=sys.__stdout__)
        raise
    print(f"[acceptance] {number:>2} {name}: PASS", file=sys.__stdout__)


def random_sentences(rng, n, max_len=80):
    """Random UTF-8 sentences over a wide code-point range (no surrogates)."""
    sentences = []
    for _ in range(n):
        length = rng.randint(1, max_len)
        chars = []
        for _ in range(length):
            cp = rng.choice((rng.randint(32, 0xD7FF), rng.randint(0xE000, 0x2FFFF)))
            chars.append(chr(cp))
        sentences.append("".join(chars))
    return sentences


def test_1_tagging_determinism_and_oracle():
    with verdict_line(1, "tagging determinism + MD5 oracle"):
        start = time.monotonic()
        sentences = random_sentences(random.Random(20260823), 10_000)
        tag_re = re.compile(r"^[0-9a-f]{8}$")
        tags = []
        for s in sentences:
            tag = make_tag(s)
            assert tag_re.match(tag)
            assert tag == hashlib.md5(s.encode("utf-8")).hexdigest()[:8]
            tags.append(tag)
        # second, separate process computes the same tags from the same seed
        code = textwrap.dedent(
            """
            import random, sys
            sys.path.insert(0, %r)
            from test_acceptance import random_sentences
            from citeground.preprocess import make_tag
            for s in random_sentences(random.Random(20260823), 10_000):
                print(make_tag(s))
            """
        ) % str(__file__.rsplit("/", 1)[0])
        other = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True, check=True
        )
        assert other.stdout.split() == tags
        assert time.monotonic() - start < 10


def test_2_round_trip_100_documents():
    with verdict_line(2, "tag/serialize/strip round trip"):
        rng = random.Random(2)
        words = ["Haus", "Stadt", "Wasser", "Jahr", "Leute", "Kosten", "Plan"]
        for i in range(100):
            n = rng.randint(2, 12)
            raw = " ".join(
                " ".join(rng.choice(words) for _ in range(rng.randint(2, 9))) + "."
                for _ in range(n)
            )
            expected = segment(normalize_whitespace(raw), "de")
            doc = tag_document(SourceDocument(raw_text=raw, language="de", doc_id=f"d{i}"))
            assert strip_tags(doc.serialize()) == " ".join(expected)
            assert len(doc.sentences) >= 2


def test_3_verifier_soundness_completeness():
    with verdict_line(3, "verifier soundness/completeness"):
        doc = build_doc(
            [f"Source sentence number {i} states one fact." for i in range(12)],
            language="en",
        )
        ts = [s.tag for s in doc.sentences]
        rng = random.Random(3)

        def clean(k):
            used = rng.sample(ts, k)
            return " ".join(f"Fact {i} holds [<{t}>]." for i, t in enumerate(used)), used

        def add_html(text):
            return "<b>Note.</b> " + text.replace("holds", "<i>holds</i>")

        # 50 clean summaries: no false positives, HTML changes no verdict
        for _ in range(50):
            summary, _ = clean(rng.randint(2, 6))
            assert verify_summary(summary, doc).passed
            assert verify_summary(add_html(summary), doc).passed

        # 50 mutated summaries: exactly the injected class flagged
        classes = ["unknown", "duplicate", "combined", "missing"]
        for i in range(50):
            summary, used = clean(rng.randint(2, 5))
            injected = classes[i % 4]
            required = None
            if injected == "unknown":
                summary += " Extra [<ffffffff>]."
            elif injected == "duplicate":
                summary += f" Again [<{used[0]}>]."
            elif injected == "combined":
                spare = [t for t in ts if t not in used]
                summary += f" Pair [<{spare[0]}>][<{spare[1]}>]."
            else:
                missing = next(t for t in ts if t not in used)
                required = used + [missing]
            for text in (summary, add_html(summary)):
                report = verify_summary(text, doc, required_tags=required)
                flags = {
                    "unknown": bool(report.unknown_tags),
                    "duplicate": bool(report.duplicate_tags),
                    "combined": bool(report.combined_refs),
                    "missing": bool(report.missing_required),
                }
                assert flags[injected]
                assert sum(flags.values()) == 1
                assert not report.passed


def test_4_evenness_values_and_property():
    with verdict_line(4, "evenness formula"):
        assert evenness([0.25, 0.5, 0.75]) == 1.0
        assert abs(evenness([0.05, 0.10, 0.15]) - 0.4) <= 1e-9
        rng = random.Random(4)
        for _ in range(500):
            k = rng.randint(1, 10)
            positions = sorted(rng.random() for _ in range(k))
            score = evenness(positions)
            assert score <= 1.0 + 1e-12
            uniform = [i / (k + 1) for i in range(1, k + 1)]
            if all(abs(p - u) < 1e-12 for p, u in zip(positions, uniform)):
                assert abs(score - 1.0) < 1e-9
            else:
                assert score < 1.0
        for k in range(1, 11):
            assert evenness([i / (k + 1) for i in range(1, k + 1)]) == pytest.approx(
                1.0, abs=1e-12
            )


def test_5_percentile_filter_against_sort_oracle():
    with verdict_line(5, "percentile filter vs nearest-rank oracle"):
        rng = random.Random(5)
        scores = rng.sample(range(100_000), 100)
        mask = percentile_filter(scores, 15)
        assert mask.count(False) == 15
        ordered = sorted(scores)
        threshold = ordered[15]  # nearest-rank: ceil(15/100 * 100) = 15
        for score, keep in zip(scores, mask):
            assert keep == (score >= threshold)
        assert sorted(s for s, k in zip(scores, mask) if not k) == ordered[:15]
        assert percentile_filter([7.0] * 100, 15) == [True] * 100


def test_6_chunk_planning_boundaries_and_partition():
    with verdict_line(6, "chunk planning"):
        counter = lambda text: text.count("x")

        def doc_of(sizes):
            return build_doc([f"s{i} " + "x" * n for i, n in enumerate(sizes)])

        budget = TokenBudget()
        rng = random.Random(6)
        for _ in range(60):
            total_target = rng.randint(1_000, 200_000)
            sizes = []
            while sum(sizes) < total_target:
                sizes.append(rng.randint(50, 20_000))
            doc = doc_of(sizes)
            mode, chunks = plan_chunks(doc, budget, counter=counter)
            assert mode is (
                GenerationMode.ITERATIVE
                if sum(sizes) >= budget.oneshot_limit
                else GenerationMode.ONESHOT
            )
            assert tuple(s for c in chunks for s in c.sentences) == doc.sentences
            if mode is GenerationMode.ITERATIVE:
                for chunk in chunks:
                    if len(chunk.sentences) > 1:
                        assert chunk.token_count <= budget.chunk_target
        # mode flips exactly at the 30K threshold
        assert plan_chunks(doc_of([15_000, 15_000]), budget, counter=counter)[0] is GenerationMode.ITERATIVE
        assert plan_chunks(doc_of([15_000, 14_999]), budget, counter=counter)[0] is GenerationMode.ONESHOT


def test_7_instruction_mix_frequencies():
    with verdict_line(7, "instruction mix 30/40/10/10/10"):
        rng = random.Random(7)
        n = 100_000
        counts = {}
        for _ in range(n):
            category = sample_instruction_category(rng)
            counts[category] = counts.get(category, 0) + 1
        for category, weight in CATEGORY_WEIGHTS:
            assert abs(counts.get(category, 0) / n - weight) < 0.01


def test_8_relaxation_worked_pair():
    with verdict_line(8, "constraint relaxation"):
        for n in (2, 5, 7, 12, 100):
            strict = (
                f"Summarize in exactly {n} bullet points. "
                "Only bullets, no introduction or conclusion."
            )
            assert relax_instruction(strict) == f"Summarize in {n} bullet points."


def test_9_end_to_end_determinism(tmp_path):
    with verdict_line(9, "end-to-end run determinism"):
        docs = tmp_path / "docs"
        docs.mkdir()
        for i in range(5):
            (docs / f"doc{i}.txt").write_text(
                f"Bericht {i} beginnt mit einer Einleitung. "
                f"Der Rat beschloss Punkt {i} einstimmig. "
                f"Die Kosten betragen {i + 1} Millionen Euro. "
                "Eine Entscheidung folgt im Herbst.",
                encoding="utf-8",
            )
        marker = tag_document(
            SourceDocument(
                raw_text=(docs / "doc2.txt").read_text(encoding="utf-8"),
                language="de",
                doc_id="doc2",
            )
        ).sentences[0].tag
        script = tmp_path / "script.json"
        script.write_text(
            json.dumps(
                [
                    {
                        "match": f"<{marker}>",
                        "content": "<reasoning>r</reasoning><summary>Bad [<ffffffff>].</summary>",
                    }
                ]
            ),
            encoding="utf-8",
        )
        config_path = tmp_path / "run.ini"
        config_path.write_text(
            "[pipeline]\nseed = 11\nlanguage = de\n\n"
            f"[gateway]\ntype = mock\nauto = true\nscript = {script}\n",
            encoding="utf-8",
        )
        from citeground.config import load_config

        config = load_config(config_path)
        out_a, out_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        _, manifest_a = run_pipeline(config, docs, out_a)
        _, manifest_b = run_pipeline(config, docs, out_b)
        assert out_a.read_bytes() == out_b.read_bytes()
        assert manifest_a == manifest_b
        counts = manifest_a["counts"]
        assert counts["generated"] >= counts["verification_passed"] >= counts["quality_kept"]
        assert counts["generated"] == 5
        assert counts["verification_passed"] == 4  # the scripted bad document
        assert len(read_records(out_a)) == counts["quality_kept"]


def test_10_stats_report_exact_percentages():
    with verdict_line(10, "dataset stats report"):
        records = [
            SummaryRecord(
                doc_id=f"d{i}",
                tagged_source="<deadbeef>S.</deadbeef>",
                reasoning="",
                summary="S [<deadbeef>].",
                mode="iterative" if i < 37 else "oneshot",
                language="de",
                instruction="Focus on costs." if i < 62 else None,
            )
            for i in range(100)
        ]
        stats = compute_stats(records, counter=lambda text: 8)
        assert stats.total_examples == 100
        assert stats.avg_tokens == 8.0
        assert stats.pct_iterative == 37.0
        assert stats.pct_oneshot == 63.0
        assert stats.pct_with_instruction == 62.0
        text = stats.render_text()
        for label in (
            "Total Examples",
            "Avg. Tokens",
            "Generation Mode",
            "Iterative",
            "Oneshot",
            "With Custom Instruction",
        ):
            assert label in text
        assert "37.0%" in text and "63.0%" in text and "62.0%" in text


def test_11_eval_aggregation():
    with verdict_line(11, "eval aggregation"):
        def fixture(sample_id, passes):
            return EvalResult(
                sample_id=sample_id,
                verdicts={c: Verdict(ok, "") for c, ok in passes.items()},
                applicable=frozenset(passes),
            )

        instructed = fixture(
            "a",
            {"fact": True, "coverage": True, "specificity": True,
             "format": True, "instruction": False},
        )
        report = aggregate([instructed])
        assert report.overall == 0.8
        assert report.aggregation == "micro"

        uninstructed = fixture(
            "b", {"fact": True, "coverage": True, "specificity": False, "format": True}
        )
        report = aggregate([uninstructed])
        assert "instruction" not in report.per_criterion
        assert report.overall == 0.75

        both = aggregate([instructed, uninstructed])
        assert both.overall == pytest.approx(7 / 9)
        assert both.per_criterion["instruction"] == 0.0

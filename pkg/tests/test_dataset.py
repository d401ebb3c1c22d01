import json

import pytest

from citeground.dataset import (
    RecordParseError,
    SummaryRecord,
    compute_stats,
    export_records,
    read_records,
    write_records,
)
from citeground.quality import QualityReport
from citeground.verify import VerificationReport


def make_record(i=0, mode="oneshot", instruction=None, **kwargs):
    return SummaryRecord(
        doc_id=f"doc{i}",
        tagged_source=f"<deadbee{i % 10}>Source {i}.</deadbee{i % 10}>",
        reasoning="Plan the summary.",
        summary=f"Summary {i} [<deadbee{i % 10}>].",
        mode=mode,
        language="de",
        instruction=instruction,
        **kwargs,
    )


class TestSummaryRecord:
    def test_rejects_empty_summary(self):
        with pytest.raises(ValueError):
            SummaryRecord(
                doc_id="d", tagged_source="", reasoning="", summary="",
                mode="oneshot", language="de",
            )

    def test_rejects_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            make_record(mode="streaming")

    def test_exportable_gate(self):
        clean = VerificationReport(
            citations=(), unknown_tags=(), duplicate_tags=(), combined_refs=(),
            missing_required=(), passed=True,
        )
        dirty = VerificationReport(
            citations=(), unknown_tags=("ffffffff",), duplicate_tags=(),
            combined_refs=(), missing_required=(), passed=False,
        )
        assert make_record(verification=clean).exportable
        assert not make_record(verification=dirty).exportable
        assert make_record().exportable  # unverified records pass through


class TestJsonlRoundTrip:
    def test_round_trip(self, tmp_path):
        quality = QualityReport(
            evenness=0.8, max_gap_tokens=40, positions=(0.3, 0.7),
            judge_flags={"coherence": True}, verdict="keep",
        )
        records = [
            make_record(0),
            make_record(1, mode="iterative", instruction="Use bullets.",
                        instruction_category="bullets", quality=quality),
        ]
        path = tmp_path / "out.jsonl"
        assert write_records(records, path) == 2
        assert read_records(path) == records

    def test_extras_preserved(self, tmp_path):
        record = make_record(extras={"run_id": "abc", "pipeline_rev": 3})
        path = tmp_path / "out.jsonl"
        write_records([record], path)
        loaded = read_records(path)[0]
        assert loaded.extras == {"run_id": "abc", "pipeline_rev": 3}
        assert loaded == record

    def test_truncated_line_names_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        good = json.dumps(make_record().to_json(), ensure_ascii=False)
        path.write_text(good + "\n" + good[: len(good) // 2] + "\n", encoding="utf-8")
        with pytest.raises(RecordParseError) as err:
            read_records(path)
        assert err.value.line_number == 2
        assert "line 2" in str(err.value)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        assert read_records(path) == []

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "gappy.jsonl"
        line = json.dumps(make_record().to_json(), ensure_ascii=False)
        path.write_text(line + "\n\n" + line + "\n", encoding="utf-8")
        assert len(read_records(path)) == 2

    def test_export_drops_failed_verification(self, tmp_path):
        dirty = VerificationReport(
            citations=(), unknown_tags=("ffffffff",), duplicate_tags=(),
            combined_refs=(), missing_required=(), passed=False,
        )
        records = [make_record(0), make_record(1, verification=dirty)]
        path = tmp_path / "train.jsonl"
        assert export_records(records, path) == 1
        assert read_records(path)[0].doc_id == "doc0"


class TestComputeStats:
    def test_known_composition(self):
        # 58 iterative / 42 oneshot, 70 instructed
        records = [
            make_record(
                i,
                mode="iterative" if i < 58 else "oneshot",
                instruction="Focus on costs." if i < 70 else None,
            )
            for i in range(100)
        ]
        stats = compute_stats(records)
        assert stats.total_examples == 100
        assert stats.pct_iterative == 58.0
        assert stats.pct_oneshot == 42.0
        assert stats.pct_with_instruction == 70.0

    def test_one_decimal_rounding(self):
        records = [
            make_record(i, mode="iterative" if i == 0 else "oneshot")
            for i in range(3)
        ]
        stats = compute_stats(records)
        assert stats.pct_iterative == 33.3
        assert stats.pct_oneshot == 66.7

    def test_empty_is_all_zero(self):
        stats = compute_stats([])
        assert stats.total_examples == 0
        assert stats.avg_tokens == 0.0
        assert stats.pct_iterative == 0.0

    def test_avg_tokens_uses_counter(self):
        records = [make_record(i) for i in range(4)]
        stats = compute_stats(records, counter=lambda text: 10)
        assert stats.avg_tokens == 10.0

    def test_render_text_row_labels(self):
        text = compute_stats([make_record(0)]).render_text()
        for label in (
            "Total Examples",
            "Avg. Tokens",
            "Generation Mode",
            "Iterative",
            "Oneshot",
            "With Custom Instruction",
        ):
            assert label in text

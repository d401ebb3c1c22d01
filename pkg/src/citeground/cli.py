"""Command-line entry point wiring the pipeline stages.

Subcommands: tag, run, verify, score, filter, render, stats, eval, merge.
Exit codes: 0 success, 1 fatal config/IO error, 2 completed with
per-document failures under --keep-going.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import dataset, evalharness, prompts, quality, render as render_mod
from .config import Config, ConfigError, load_config
from .gateway import user_request
from .pipeline import EXIT_FATAL, PipelineFatalError, run_pipeline
from .preprocess import (
    SUPPORTED_LANGUAGES,
    SourceDocument,
    TagParseError,
    parse_tagged_document,
    tag_document,
)
from .verify import verify_summary

log = logging.getLogger(__name__)


def _add_source_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--source", help="one serialized tagged-source file used for all records")
    group.add_argument("--sources", help="directory of <doc_id>.txt tagged-source files")
    parser.add_argument("--language", default="de", choices=SUPPORTED_LANGUAGES)


def _source_doc(args, doc_id: str):
    if args.source:
        path = Path(args.source)
    else:
        path = Path(args.sources) / f"{doc_id}.txt"
    return parse_tagged_document(
        path.read_text(encoding="utf-8"), language=args.language, doc_id=doc_id
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="citeground",
        description="Citation-grounded summarization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tag", help="segment and tag a source document")
    p.add_argument("input", help="raw UTF-8 text file")
    p.add_argument("--language", default="de", choices=SUPPORTED_LANGUAGES)
    p.add_argument("-o", "--output", help="write tagged text here (default stdout)")

    p = sub.add_parser("run", help="run the full generation pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True, help="directory of .txt source documents")
    p.add_argument("--output", required=True, help="output records JSONL")
    p.add_argument("--keep-going", action="store_true", help="skip failing documents")
    p.add_argument("--seed", type=int, help="override the config file seed")

    p = sub.add_parser("verify", help="verify record citations against tagged sources")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="report JSONL")
    _add_source_args(p)

    p = sub.add_parser("score", help="citation-distribution quality reports")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True, help="QualityReport JSONL")
    p.add_argument("--gap-threshold", type=int, default=quality.DEFAULT_GAP_THRESHOLD_TOKENS)

    p = sub.add_parser("filter", help="apply percentile and gap filters, keep passing records")
    p.add_argument("--records", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--percentile", type=float, default=quality.DEFAULT_PERCENTILE)
    p.add_argument("--gap-threshold", type=int, default=quality.DEFAULT_GAP_THRESHOLD_TOKENS)

    p = sub.add_parser("render", help="render an annotated summary")
    p.add_argument("--records", required=True)
    p.add_argument("--index", type=int, default=0, help="record index within the JSONL")
    p.add_argument("--format", default="text", choices=render_mod.FORMATS)
    p.add_argument("-o", "--output", help="default stdout")
    _add_source_args(p)

    p = sub.add_parser("stats", help="dataset composition report")
    p.add_argument("--records", required=True)
    p.add_argument("--json", action="store_true", help="JSON instead of the text table")

    p = sub.add_parser("eval", help="five-criterion binary judge evaluation")
    p.add_argument("--records", required=True)
    p.add_argument("--config", required=True, help="config file providing the judge gateway")
    p.add_argument("--out", required=True, help="EvalResult JSONL")
    p.add_argument("--macro", action="store_true", help="macro-average the overall score")
    _add_source_args(p)

    p = sub.add_parser("merge", help="merge partial summaries into one record")
    p.add_argument("--partials", required=True, help="JSON array of partial summary strings")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output record JSONL")
    p.add_argument("--word-count", type=int, default=400)
    p.add_argument("--instruction")
    _add_source_args(p)

    return parser


def _cmd_tag(args) -> int:
    doc = tag_document(
        SourceDocument(
            raw_text=Path(args.input).read_text(encoding="utf-8"),
            language=args.language,
            doc_id=Path(args.input).stem,
        )
    )
    text = doc.serialize()
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(
            config, pipeline=dataclasses.replace(config.pipeline, seed=args.seed)
        )
    exit_code, manifest = run_pipeline(config, args.input, args.output, args.keep_going)
    counts = manifest["counts"]
    print(
        f"documents={manifest['documents']} generated={counts['generated']} "
        f"verification_passed={counts['verification_passed']} "
        f"quality_kept={counts['quality_kept']} output={args.output}"
    )
    return exit_code


def _cmd_verify(args) -> int:
    records = dataset.read_records(args.records)
    any_failed = False
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in records:
            doc = _source_doc(args, record.doc_id)
            report = verify_summary(record.summary, doc)
            any_failed = any_failed or not report.passed
            obj = {"doc_id": record.doc_id, **report.to_json()}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return 1 if any_failed else 0


def _cmd_score(args) -> int:
    records = dataset.read_records(args.records)
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in records:
            report = quality.score_record(record, gap_threshold_tokens=args.gap_threshold)
            obj = {"doc_id": record.doc_id, **report.to_json()}
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return 0


def _cmd_filter(args) -> int:
    records = dataset.read_records(args.records)
    if not records:
        dataset.write_records([], args.out)
        print("kept 0 of 0 records")
        return 0
    reports = [
        quality.score_record(r, gap_threshold_tokens=args.gap_threshold) for r in records
    ]
    mask = quality.percentile_filter([rep.evenness for rep in reports], args.percentile)
    kept = [
        dataclasses.replace(record, quality=report)
        for record, report, keep in zip(records, reports, mask)
        if keep and report.verdict == "keep"
    ]
    dataset.write_records(kept, args.out)
    print(f"kept {len(kept)} of {len(records)} records")
    return 0


def _cmd_render(args) -> int:
    records = dataset.read_records(args.records)
    record = records[args.index]
    doc = _source_doc(args, record.doc_id)
    text = render_mod.render_annotated(record, doc, args.format)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_stats(args) -> int:
    stats = dataset.compute_stats(dataset.read_records(args.records))
    if args.json:
        print(json.dumps(stats.to_json(), indent=2))
    else:
        print(stats.render_text())
    return 0


def _cmd_eval(args) -> int:
    config = load_config(args.config)
    gateway = config.make_gateway()
    records = dataset.read_records(args.records)
    results = []
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in records:
            doc = _source_doc(args, record.doc_id)
            result = evalharness.judge_sample(record, doc, gateway)
            results.append(result)
            fh.write(json.dumps(result.to_json(), ensure_ascii=False) + "\n")
    report = evalharness.aggregate(results, macro=args.macro)
    print(report.render_text())
    return 0


def _cmd_merge(args) -> int:
    config = load_config(args.config)
    gateway = config.make_gateway()
    with open(args.partials, encoding="utf-8") as fh:
        partials = json.load(fh)
    if not isinstance(partials, list) or not all(isinstance(p, str) for p in partials):
        raise ConfigError(f"{args.partials} must hold a JSON array of strings")
    doc = _source_doc(args, Path(args.source or args.sources).stem)
    params = prompts.PromptParams(
        word_count=args.word_count,
        number_of_xml_tags=prompts.choose_tag_count(doc, args.word_count),
        language=args.language,
    )
    prompt = prompts.build_merge_prompt(partials, params, args.instruction)
    response = gateway.chat(user_request(prompt, system=prompts.SYSTEM_PROMPT))
    output = prompts.parse_model_output(response.content)
    report = verify_summary(output.summary, doc)
    record = dataset.SummaryRecord(
        doc_id=doc.doc_id,
        tagged_source=doc.serialize(),
        reasoning=output.reasoning,
        summary=output.summary,
        instruction=args.instruction,
        mode="iterative",
        language=args.language,
        verification=report,
    )
    dataset.write_records([record], args.out)
    return 0 if report.passed else 1


_COMMANDS = {
    "tag": _cmd_tag,
    "run": _cmd_run,
    "verify": _cmd_verify,
    "score": _cmd_score,
    "filter": _cmd_filter,
    "render": _cmd_render,
    "stats": _cmd_stats,
    "eval": _cmd_eval,
    "merge": _cmd_merge,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, PipelineFatalError, TagParseError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())

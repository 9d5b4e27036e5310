"""Command-line entry point.

Subcommands: validate, gen-example, run, score, report. Each accepts the
global flags --config, --seed, --out. `run` and `score` are separate phases
so transcripts produced elsewhere can be scored with the same metrics code.

Exit codes:
  validate     0 valid call, 1 invalid call, 2 parse failure, 3 schema load failure
  gen-example  0 ok, 1 generation failed, 3 backend/config problem
  run          0 when at least one dialog completed, 1 otherwise, 3 config problem
  score        0 ok, 2 transcript/corpus mismatch or empty transcripts
  report       0 ok, 2 missing/unreadable report input
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .calls import extract_api_call
from .config import ensure_out_dir, load_config
from .corpus import load_corpus
from .errors import (
    ConfigError,
    ExemplarGenerationFailed,
    MalformedDocument,
    ParseError,
    SchemaViolation,
    TodbenchError,
)
from .prompts import ExemplarCache, choose_source_seed, generate_exemplar, exemplar_quality_check
from .report import render_figures, render_table, write_report_files
from .runner import build_backend, run_corpus, write_run_outputs
from .schema import build_registry, load_schema_file
from .scoring import CorpusMismatch, score_run
from .transcript import load_transcripts, write_transcripts
from .validator import feedback_message, validate


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to the TOML run configuration")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out", help="override the configured output directory")


def _load_run_config(args) -> "RunConfig":
    overrides = {"seed": args.seed, "out": args.out}
    if getattr(args, "no_feedback", False):
        overrides["no_feedback"] = True
    if getattr(args, "no_chain", False):
        overrides["no_chain"] = True
    return load_config(args.config, overrides=overrides)


def cmd_validate(args) -> int:
    try:
        schemas = [load_schema_file(path) for path in args.schema]
        registry = build_registry(schemas)
    except (OSError, MalformedDocument, SchemaViolation) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 3
    try:
        call = extract_api_call(args.call)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    if call is None:
        print("parse error: no API call found in the input", file=sys.stderr)
        return 2
    verdict = validate(call, registry)
    if verdict.ok:
        print("valid")
        return 0
    print("invalid")
    print(feedback_message(verdict, registry))
    return 1


def cmd_gen_example(args) -> int:
    try:
        config = _load_run_config(args)
        corpus = load_corpus(config.corpus)
        backend = build_backend(config, corpus)
    except (ConfigError, OSError, TodbenchError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    out_dir = ensure_out_dir(config)
    domains = [name.strip() for name in args.domains.split(",") if name.strip()]
    schemas = []
    for name in domains:
        schema = corpus.registry.get(name)
        if schema is None:
            print(f"configuration error: unknown domain {name!r}", file=sys.stderr)
            return 3
        schemas.append(schema)
    seed_schema, seed_dialog = choose_source_seed(corpus.seeds, schemas)
    cache = ExemplarCache(out_dir / "exemplar-cache")
    try:
        exemplar = generate_exemplar(backend, seed_schema, seed_dialog, schemas,
                                     cache=cache)
    except ExemplarGenerationFailed as exc:
        raw_path = out_dir / "exemplar-failed.txt"
        raw_path.write_text(exc.last_completion, encoding="utf-8")
        print(f"exemplar generation failed: {exc}; raw completion saved to "
              f"{raw_path}", file=sys.stderr)
        return 1
    exemplar_path = out_dir / "exemplar.jsonl"
    write_transcripts(exemplar_path, [exemplar])
    quality = {
        "domains": domains,
        "turns": len(exemplar.turns),
        "api_calls": len(exemplar.api_calls()),
        "quality_check": exemplar_quality_check(exemplar, schemas),
        "backend_calls": getattr(backend, "calls", None),
    }
    (out_dir / "exemplar-quality.json").write_text(
        json.dumps(quality, indent=2) + "\n", encoding="utf-8")
    print(f"exemplar written to {exemplar_path}")
    return 0


def cmd_run(args) -> int:
    try:
        config = _load_run_config(args)
        corpus = load_corpus(config.corpus)
    except (ConfigError, OSError, TodbenchError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 3
    out_dir = ensure_out_dir(config)
    outcomes, manifest = run_corpus(config, corpus)
    transcripts_path, manifest_path = write_run_outputs(outcomes, manifest, out_dir)
    completed = sum(1 for o in outcomes if o.status == "complete")
    for outcome in outcomes:
        if outcome.status != "complete":
            print(f"{outcome.dialog_id}: {outcome.status} {outcome.error}".strip(),
                  file=sys.stderr)
    print(f"{completed}/{len(outcomes)} dialogs completed; transcripts at "
          f"{transcripts_path}, manifest at {manifest_path}")
    return 0 if completed >= 1 else 1


def cmd_score(args) -> int:
    try:
        corpus = load_corpus(args.corpus)
        transcripts = load_transcripts(args.transcripts)
        report, _scores = score_run(corpus, transcripts,
                                    threshold=args.fuzzy_threshold)
    except (CorpusMismatch, MalformedDocument, OSError) as exc:
        print(f"scoring error: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(args.out or "out")
    paths = write_report_files(report, out_dir)
    print(render_table(report), end="")
    print(f"report files: {paths['json']}, {paths['table']}, {paths['histogram']}")
    return 0


def cmd_report(args) -> int:
    report_path = Path(args.report)
    if not report_path.exists():
        print(f"report error: {report_path} does not exist", file=sys.stderr)
        return 2
    out_dir = Path(args.out or report_path.parent)
    try:
        figures = render_figures(report_path, out_dir)
        doc = json.loads(report_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"report error: {exc}", file=sys.stderr)
        return 2
    for path in figures:
        print(f"figure written: {path}")
    print(f"single/multi/both dialogs: "
          f"{doc['single']['dialogs']}/{doc['multi']['dialogs']}/{doc['both']['dialogs']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="todbench",
        description="Schema-driven orchestration and evaluation harness for "
                    "task-oriented dialog systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate",
                                help="validate one API call against schemas")
    _add_common(p_validate)
    p_validate.add_argument("--schema", action="append", required=True,
                            help="schema JSON path (repeatable)")
    p_validate.add_argument("call", help="API call text")
    p_validate.set_defaults(func=cmd_validate)

    p_gen = sub.add_parser("gen-example",
                           help="run stage-1 chaining only and save the exemplar")
    _add_common(p_gen)
    p_gen.add_argument("--domains", required=True,
                       help="comma-separated target domain names")
    p_gen.set_defaults(func=cmd_gen_example)

    p_run = sub.add_parser("run", help="run all corpus dialogs")
    _add_common(p_run)
    p_run.add_argument("--no-feedback", action="store_true",
                       help="disable the fine-grained feedback retry loop")
    p_run.add_argument("--no-chain", action="store_true",
                       help="use the raw source dialog instead of a chained exemplar")
    p_run.set_defaults(func=cmd_run)

    p_score = sub.add_parser("score", help="score transcripts against a corpus")
    _add_common(p_score)
    p_score.add_argument("--transcripts", required=True,
                         help="transcripts.jsonl produced by run")
    p_score.add_argument("--corpus", required=True, help="corpus root directory")
    p_score.add_argument("--fuzzy-threshold", type=float, default=0.8)
    p_score.set_defaults(func=cmd_score)

    p_report = sub.add_parser("report",
                              help="render figures and tables from a report")
    _add_common(p_report)
    p_report.add_argument("--report", required=True,
                          help="report.json produced by score")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line surface.

Exit codes: 0 success, 1 content error (bad corpus, failed validation),
2 usage/config error (bad flags, missing files). Machine-readable output
goes to stdout or files; diagnostics and summaries go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import metrics
from .auditor import audit
from .clients import DEFAULT_TIMEOUT_MS, HttpModelClient, ScriptedClient
from .coder import DEFAULT_TRUNCATE_LIMIT, CandidateCode, ORIGIN_MODEL
from .exceptions import ConfigError, CorpusError, HybridCodeError, MissingFileError
from .kb import load_abbrev_map, load_kb, load_keyword_map, validate_files
from .orchestrator import MODE_CODER_ONLY, MODE_FULL, RunConfig, read_corpus, run_batch

EXIT_OK = 0
EXIT_CONTENT = 1
EXIT_USAGE = 2

ENDPOINT_ENV_VAR = "HYBRID_CODE_MODEL_ENDPOINT"

DEFAULT_FILTER_TERMS = "diabetes,hypertension,asthma"


def _err(message: str) -> None:
    print(f"hybridcode: {message}", file=sys.stderr)


def _load_bundle(args):
    kb = load_kb(args.kb)
    kmap = load_keyword_map(args.keywords, kb)
    amap = load_abbrev_map(args.abbrevs, kb)
    return kb, kmap, amap


def _make_client(args):
    script = getattr(args, "model_script", None)
    endpoint = getattr(args, "model_endpoint", None) or os.environ.get(ENDPOINT_ENV_VAR)
    if script and getattr(args, "model_endpoint", None):
        raise ConfigError("--model-endpoint and --model-script are mutually exclusive")
    if script:
        return ScriptedClient.from_file(script)
    if endpoint:
        return HttpModelClient(endpoint, timeout_ms=args.timeout_ms)
    raise ConfigError(
        f"no model source: pass --model-endpoint or --model-script "
        f"(or set {ENDPOINT_ENV_VAR})")


def _dump_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, ensure_ascii=False)


def cmd_run(args) -> int:
    mode = MODE_CODER_ONLY if args.mode == "coder-only" else MODE_FULL
    try:
        kb, kmap, amap = _load_bundle(args)
        client = _make_client(args)
        cfg = RunConfig(mode=mode, truncate_limit=args.truncate,
                        timeout_ms=args.timeout_ms, workers=args.workers,
                        seed=args.seed)
        corpus = read_corpus(args.corpus)
    except CorpusError as exc:
        _err(str(exc))
        return EXIT_CONTENT
    except HybridCodeError as exc:
        _err(str(exc))
        return EXIT_USAGE

    batch = run_batch(corpus, cfg, kb, kmap, amap, client)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "cases.jsonl", "w", encoding="utf-8") as fh:
        for case in batch.cases:
            fh.write(_dump_json(case.to_dict(include_timings=args.emit_timings)) + "\n")
    report_doc = batch.report.to_dict(include_timings=args.emit_timings)
    with open(out_dir / "report.json", "w", encoding="utf-8") as fh:
        json.dump(report_doc, fh, sort_keys=True, ensure_ascii=False, indent=2)
        fh.write("\n")
    metrics.write_report_csv(batch.report, out_dir / "report.csv")

    for metric, count, pct in metrics.report_table_rows(batch.report):
        line = f"{metric}: {count}"
        if pct:
            line += f" ({pct})"
        print(line, file=sys.stderr)
    return EXIT_OK


def cmd_audit(args) -> int:
    try:
        kb = load_kb(args.kb)
    except HybridCodeError as exc:
        _err(str(exc))
        return EXIT_USAGE
    candidate = CandidateCode(code=args.code, diagnosis="", confidence=1.0,
                              origin=ORIGIN_MODEL)
    verdict = audit(candidate, args.text, kb)
    print(_dump_json(verdict.to_dict()))
    return EXIT_OK


def cmd_validate_kb(args) -> int:
    try:
        violations = validate_files(args.kb, args.keywords, args.abbrevs)
    except MissingFileError as exc:
        _err(str(exc))
        return EXIT_USAGE
    for violation in violations:
        print(violation, file=sys.stderr)
    if violations:
        return EXIT_CONTENT
    print("knowledge base, keyword map, and abbreviation map are consistent",
          file=sys.stderr)
    return EXIT_OK


def cmd_filter(args) -> int:
    terms = [t.strip().lower() for t in args.terms.split(",") if t.strip()]
    if not terms:
        _err("empty term list; refusing to select nothing")
        return EXIT_USAGE
    try:
        notes = read_corpus(args.corpus)
    except CorpusError as exc:
        _err(str(exc))
        return EXIT_CONTENT
    except HybridCodeError as exc:
        _err(str(exc))
        return EXIT_USAGE
    kept = 0
    out_path = Path(args.out)
    if out_path.parent and not out_path.parent.exists():
        out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for note in notes:
            lowered = note.text.lower()
            if any(term in lowered for term in terms):
                fh.write(_dump_json({"case_id": note.case_id, "text": note.text}) + "\n")
                kept += 1
    print(f"kept {kept} of {len(notes)} notes", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        kb, kmap, amap = _load_bundle(args)
        client = None
        if args.model_endpoint or args.model_script or os.environ.get(ENDPOINT_ENV_VAR):
            client = _make_client(args)
    except HybridCodeError as exc:
        _err(str(exc))
        return EXIT_USAGE
    import uvicorn

    from .service import create_app
    app = create_app(kb, kmap, amap, client=client,
                     truncate_limit=args.truncate)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _add_bundle_flags(parser):
    parser.add_argument("--kb", required=True, help="icd10_rules.json path")
    parser.add_argument("--keywords", required=True, help="keyword_map.json path")
    parser.add_argument("--abbrevs", required=True, help="abbrev_map.json path")


def _add_model_flags(parser):
    parser.add_argument("--model-endpoint", help=f"generation endpoint URL "
                        f"(falls back to ${ENDPOINT_ENV_VAR})")
    parser.add_argument("--model-script", help="scripted stub fixture path")
    parser.add_argument("--timeout-ms", type=int, default=DEFAULT_TIMEOUT_MS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridcode",
        description="Propose ICD-10 codes from clinical notes and verify them "
                    "against a knowledge base.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="process a corpus and write cases.jsonl/report.json")
    p_run.add_argument("--corpus", required=True, help="JSON Lines corpus path")
    _add_bundle_flags(p_run)
    p_run.add_argument("--mode", choices=["full", "coder-only"], default="full")
    _add_model_flags(p_run)
    p_run.add_argument("--out", required=True, help="output directory")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--truncate", type=int, default=DEFAULT_TRUNCATE_LIMIT)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--emit-timings", action="store_true",
                       help="include wall-clock timings in the output files "
                            "(breaks byte-for-byte reproducibility)")
    p_run.set_defaults(func=cmd_run)

    p_audit = sub.add_parser("audit", help="audit a single code against a text")
    p_audit.add_argument("--code", required=True)
    p_audit.add_argument("--text", required=True)
    p_audit.add_argument("--kb", required=True)
    p_audit.set_defaults(func=cmd_audit)

    p_val = sub.add_parser("validate-kb", help="check KB and map integrity")
    _add_bundle_flags(p_val)
    p_val.set_defaults(func=cmd_validate_kb)

    p_filter = sub.add_parser("filter", help="keep notes mentioning any term")
    p_filter.add_argument("--corpus", required=True)
    p_filter.add_argument("--out", required=True, help="output JSONL path")
    p_filter.add_argument("--terms", default=DEFAULT_FILTER_TERMS,
                          help="comma-separated substrings (case-insensitive)")
    p_filter.set_defaults(func=cmd_filter)

    p_serve = sub.add_parser("serve", help="serve the pipeline over HTTP")
    _add_bundle_flags(p_serve)
    _add_model_flags(p_serve)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8600)
    p_serve.add_argument("--truncate", type=int, default=DEFAULT_TRUNCATE_LIMIT)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Per-case pipeline driver and the batch runner.

A case can fail only by producing an empty candidate list; client outages,
garbage model output, and empty notes all still yield a CaseResult, so a
batch either aborts up front (bad config or corpus) or completes in full.
Cases may execute on a worker pool; results are re-sequenced to input
order, so output streams are reproducible regardless of scheduling.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .auditor import AuditVerdict, audit_all
from .clients import DEFAULT_TIMEOUT_MS, ModelClient
from .coder import (
    DEFAULT_TRUNCATE_LIMIT,
    CandidateCode,
    ClinicalNote,
    propose,
)
from .exceptions import ConfigError, CorpusError
from .kb import AbbreviationMap, KeywordMap, KnowledgeBase

MODE_FULL = "full"
MODE_CODER_ONLY = "coder_only"
MODES = (MODE_FULL, MODE_CODER_ONLY)


@dataclass(frozen=True)
class RunConfig:
    mode: str = MODE_FULL
    kb_path: str | None = None
    keywords_path: str | None = None
    abbrevs_path: str | None = None
    model_endpoint: str | None = None
    model_script: str | None = None
    truncate_limit: int = DEFAULT_TRUNCATE_LIMIT
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    workers: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.truncate_limit < 1:
            raise ConfigError("truncate limit must be >= 1")
        if self.workers < 1:
            raise ConfigError("worker count must be >= 1")


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    candidates: tuple[CandidateCode, ...]
    verdicts: tuple[AuditVerdict, ...]
    accepted_codes: tuple[str, ...]
    tier_used: str
    timings: dict[str, float] = field(default_factory=dict, compare=False)

    def to_dict(self, include_timings: bool = False) -> dict:
        doc = {
            "case_id": self.case_id,
            "candidates": [
                {"code": c.code, "diagnosis": c.diagnosis,
                 "confidence": c.confidence, "origin": c.origin}
                for c in self.candidates
            ],
            "verdicts": [v.to_dict() for v in self.verdicts],
            "accepted_codes": list(self.accepted_codes),
            "tier_used": self.tier_used,
        }
        if include_timings:
            doc["timings"] = dict(self.timings)
        return doc


@dataclass(frozen=True)
class BatchResult:
    cases: tuple[CaseResult, ...]
    report: "RunReport"  # noqa: F821 - resolved at runtime via metrics


def process_case(note: ClinicalNote, cfg: RunConfig, kb: KnowledgeBase,
                 kmap: KeywordMap, amap: AbbreviationMap,
                 client: ModelClient) -> CaseResult:
    """Run one note through propose (and audit, in full mode)."""
    t0 = time.monotonic()
    proposal = propose(note, client, kmap, amap,
                       truncate_limit=cfg.truncate_limit, seed=cfg.seed)
    t1 = time.monotonic()
    candidates = proposal.candidates
    if cfg.mode == MODE_FULL:
        verdicts = tuple(audit_all(list(candidates), note.text, kb))
        accepted = tuple(v.normalized_code for v in verdicts if v.accepted)
    else:
        verdicts = ()
        accepted = tuple(c.code for c in candidates)
    t2 = time.monotonic()
    return CaseResult(
        case_id=note.case_id,
        candidates=candidates,
        verdicts=verdicts,
        accepted_codes=accepted,
        tier_used=proposal.tier,
        timings={
            "propose_ms": (t1 - t0) * 1000.0,
            "audit_ms": (t2 - t1) * 1000.0,
            "total_ms": (t2 - t0) * 1000.0,
        },
    )


def read_corpus(path) -> list[ClinicalNote]:
    """Parse and validate a JSON Lines corpus up front.

    Any malformed line aborts with CorpusError naming the 1-based line
    number, before any case is processed. Blank lines are skipped; unknown
    fields are ignored.
    """
    path = Path(path)
    try:
        raw = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"corpus file not found: {path}")
    except OSError as exc:
        raise ConfigError(f"cannot read corpus {path}: {exc}")
    notes = []
    for lineno, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"not valid JSON ({exc.msg})", line=lineno)
        if not isinstance(obj, dict):
            raise CorpusError("expected a JSON object", line=lineno)
        case_id = obj.get("case_id")
        text = obj.get("text")
        if not isinstance(case_id, str) or not case_id:
            raise CorpusError("missing or empty 'case_id'", line=lineno)
        if not isinstance(text, str):
            raise CorpusError("missing 'text' string", line=lineno)
        notes.append(ClinicalNote(case_id=case_id, text=text))
    return notes


def run_batch(corpus: list[ClinicalNote], cfg: RunConfig, kb: KnowledgeBase,
              kmap: KeywordMap, amap: AbbreviationMap,
              client: ModelClient) -> BatchResult:
    """Process every note exactly once and aggregate the run report.

    Results come back in corpus order regardless of worker scheduling.
    """
    from .metrics import summarize  # here to avoid a module cycle

    notes = list(corpus)
    if cfg.workers == 1 or len(notes) <= 1:
        cases = [process_case(n, cfg, kb, kmap, amap, client) for n in notes]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            cases = list(pool.map(
                lambda n: process_case(n, cfg, kb, kmap, amap, client), notes))
    report = summarize(cases, kb, cfg.mode)
    return BatchResult(cases=tuple(cases), report=report)

"""Hybrid neuro-symbolic ICD-10 coding pipeline.

A Coder tier proposes candidate codes from free-text discharge summaries
(language model when available, deterministic keyword/abbreviation fallback
when not); an Auditor tier verifies every candidate against an ICD-10
knowledge base and the source text, so nothing outside the knowledge base
is ever accepted.
"""

from .auditor import AuditVerdict, audit, audit_all, check_evidence, normalize_format, validate_code
from .clients import HttpModelClient, ModelRequest, ModelResponse, NullClient, ScriptedClient
from .coder import (
    CandidateCode,
    ClinicalNote,
    ProposeResult,
    build_prompt,
    extract_candidates,
    fallback_propose,
    propose,
    truncate_note,
)
from .kb import (
    AbbreviationMap,
    KBEntry,
    KeywordMap,
    KnowledgeBase,
    description_keywords,
    is_valid_icd10_format,
    load_abbrev_map,
    load_kb,
    load_keyword_map,
    lookup,
)
from .metrics import RunReport, classify_code, summarize, wilson_ci
from .orchestrator import BatchResult, CaseResult, RunConfig, process_case, read_corpus, run_batch

__version__ = "0.1.0"

__all__ = [
    "AbbreviationMap", "AuditVerdict", "BatchResult", "CandidateCode", "CaseResult",
    "ClinicalNote", "HttpModelClient", "KBEntry", "KeywordMap", "KnowledgeBase",
    "ModelRequest", "ModelResponse", "NullClient", "ProposeResult", "RunConfig",
    "RunReport", "ScriptedClient", "audit", "audit_all", "build_prompt",
    "check_evidence", "classify_code", "description_keywords", "extract_candidates",
    "fallback_propose", "is_valid_icd10_format", "load_abbrev_map", "load_kb",
    "load_keyword_map", "lookup", "normalize_format", "process_case", "propose",
    "read_corpus", "run_batch", "summarize", "truncate_note", "validate_code",
    "wilson_ci",
]

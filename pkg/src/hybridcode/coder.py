"""Candidate-code proposal: model tier first, deterministic fallback second.

The model tier prompts a text-generation client and scavenges a JSON array
out of whatever comes back. If the client fails (transport error, timeout)
or nothing parseable is found, the keyword/abbreviation fallback fires with
a flat confidence of 0.5. The two tiers never mix within one note.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .clients import ModelClient, ModelRequest
from .kb import AbbreviationMap, KeywordMap

ORIGIN_MODEL = "model"
ORIGIN_FALLBACK_KEYWORD = "fallback_keyword"
ORIGIN_FALLBACK_ABBREV = "fallback_abbrev"
_ORIGINS = (ORIGIN_MODEL, ORIGIN_FALLBACK_KEYWORD, ORIGIN_FALLBACK_ABBREV)

TIER_MODEL = "model"
TIER_FALLBACK = "fallback"

DEFAULT_TRUNCATE_LIMIT = 1500
DEFAULT_MODEL_CONFIDENCE = 0.7
FALLBACK_CONFIDENCE = 0.5


@dataclass(frozen=True)
class ClinicalNote:
    case_id: str
    text: str

    def __post_init__(self):
        if not self.case_id:
            raise ValueError("case_id must be non-empty")


@dataclass(frozen=True)
class CandidateCode:
    code: str
    diagnosis: str
    confidence: float
    origin: str

    def __post_init__(self):
        if self.origin not in _ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0,1]")
        if self.origin != ORIGIN_MODEL and self.confidence != FALLBACK_CONFIDENCE:
            raise ValueError("fallback candidates carry confidence 0.5 exactly")


@dataclass(frozen=True)
class ProposeResult:
    candidates: tuple[CandidateCode, ...]
    tier: str  # TIER_MODEL or TIER_FALLBACK


def truncate_note(text: str, limit: int = DEFAULT_TRUNCATE_LIMIT) -> str:
    """First `limit` characters of the text; shorter text passes unchanged."""
    if limit < 1:
        raise ValueError("limit must be >= 1")
    return text[:limit]


_PROMPT_TEMPLATE = """\
You are a clinical coding assistant. Read the discharge summary below and \
respond with ONLY a JSON array of ICD-10-CM code objects. Each object must \
have the fields "code", "diagnosis", and "confidence" (a number between 0 \
and 1). Do not add any other text.

Example input:
Patient is a 64 year old with poorly controlled type 2 diabetes mellitus and \
essential hypertension, discharged on metformin.
Example output:
[{"code": "E11.9", "diagnosis": "Type 2 diabetes mellitus", "confidence": 0.9}, \
{"code": "I10", "diagnosis": "Essential hypertension", "confidence": 0.85}]

Discharge summary:
{note}

JSON output:
"""


def build_prompt(note: ClinicalNote, truncate_limit: int = DEFAULT_TRUNCATE_LIMIT) -> str:
    """One-shot prompt: instructions, one worked example, the truncated note."""
    return _PROMPT_TEMPLATE.replace("{note}", truncate_note(note.text, truncate_limit))


def _balanced_array_spans(raw: str):
    """Yield substrings of `raw` that are bracket-balanced arrays, in order.

    Tracks JSON string literals so brackets inside quoted text do not count.
    Unterminated arrays are skipped.
    """
    for start, ch in enumerate(raw):
        if ch != "[":
            continue
        depth = 0
        in_string = False
        escaped = False
        for j in range(start, len(raw)):
            c = raw[j]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
            elif c == '"':
                in_string = True
            elif c == "[":
                depth += 1
            elif c == "]":
                depth -= 1
                if depth == 0:
                    yield raw[start:j + 1]
                    break


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, float(value)))


def extract_candidates(raw: str) -> list[CandidateCode]:
    """Pull model-origin candidates out of raw generated text.

    Finds the first balanced bracketed substring that parses as a JSON array
    and converts each well-formed element. Malformed elements are skipped
    silently; no parseable array at all yields the empty list, which is the
    fallback trigger rather than an error.
    """
    parsed = None
    for span in _balanced_array_spans(raw):
        try:
            value = json.loads(span)
        except json.JSONDecodeError:
            continue
        if isinstance(value, list):
            parsed = value
            break
    if parsed is None:
        return []

    candidates = []
    for element in parsed:
        if not isinstance(element, dict) or not isinstance(element.get("code"), str):
            continue
        diagnosis = element.get("diagnosis")
        if not isinstance(diagnosis, str):
            diagnosis = ""
        if "confidence" in element:
            confidence = element["confidence"]
            if not isinstance(confidence, (int, float)) or isinstance(confidence, bool) \
                    or math.isnan(confidence):
                continue
            confidence = _clamp01(confidence)
        else:
            confidence = DEFAULT_MODEL_CONFIDENCE
        candidates.append(CandidateCode(code=element["code"], diagnosis=diagnosis,
                                        confidence=confidence, origin=ORIGIN_MODEL))
    return candidates


def fallback_propose(text: str, kmap: KeywordMap, amap: AbbreviationMap) -> list[CandidateCode]:
    """Deterministic tier: keyword substring matches, then whole-token abbreviations.

    Keywords match case-insensitively anywhere in the text. Abbreviations
    match case-sensitively and only as whole tokens, so "HTN" never fires
    inside "LIGHTNING". Duplicate codes keep the first occurrence; output
    order follows map order.
    """
    lowered = text.lower()
    seen: set[str] = set()
    out: list[CandidateCode] = []
    for keyword, code in kmap:
        if keyword in lowered and code not in seen:
            seen.add(code)
            out.append(CandidateCode(code=code, diagnosis=keyword,
                                     confidence=FALLBACK_CONFIDENCE,
                                     origin=ORIGIN_FALLBACK_KEYWORD))
    for abbr, code in amap:
        if code in seen:
            continue
        if _has_whole_token(text, abbr):
            seen.add(code)
            out.append(CandidateCode(code=code, diagnosis=abbr,
                                     confidence=FALLBACK_CONFIDENCE,
                                     origin=ORIGIN_FALLBACK_ABBREV))
    return out


def _has_whole_token(text: str, token: str) -> bool:
    start = 0
    while True:
        idx = text.find(token, start)
        if idx < 0:
            return False
        before = text[idx - 1] if idx > 0 else ""
        after_idx = idx + len(token)
        after = text[after_idx] if after_idx < len(text) else ""
        if (not before.isalnum()) and (not after.isalnum()):
            return True
        start = idx + 1


def _dedup_max_confidence(candidates: list[CandidateCode]) -> list[CandidateCode]:
    # Key on the uppercased code; keep the highest-confidence instance,
    # first occurrence wins ties. Output preserves first-seen code order.
    best: dict[str, CandidateCode] = {}
    order: list[str] = []
    for cand in candidates:
        key = cand.code.upper()
        if key not in best:
            best[key] = cand
            order.append(key)
        elif cand.confidence > best[key].confidence:
            best[key] = cand
    return [best[key] for key in order]


def propose(note: ClinicalNote, client: ModelClient, kmap: KeywordMap,
            amap: AbbreviationMap, truncate_limit: int = DEFAULT_TRUNCATE_LIMIT,
            seed: int | None = None) -> ProposeResult:
    """Run the tiered proposer for one note.

    Any client failure routes to the fallback; so does an extraction that
    yields nothing. The fallback itself producing zero candidates is a legal
    outcome (the note simply gets no codes), never an exception.
    """
    request = ModelRequest(prompt=build_prompt(note, truncate_limit), seed=seed)
    candidates: list[CandidateCode] = []
    try:
        response = client.generate(request)
        candidates = extract_candidates(response.text)
    except Exception:
        candidates = []
    if candidates:
        return ProposeResult(candidates=tuple(_dedup_max_confidence(candidates)),
                             tier=TIER_MODEL)
    fallback = fallback_propose(note.text, kmap, amap)
    return ProposeResult(candidates=tuple(_dedup_max_confidence(fallback)),
                         tier=TIER_FALLBACK)

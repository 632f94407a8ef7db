"""Symbolic verification of candidate codes against the knowledge base.

Pipeline order per candidate: uppercase, dot-insertion repair, format
grammar check, KB membership, evidence check. Codes outside the KB are
rejected early without running the evidence scan. Every outcome is a
verdict; the auditor never raises for content reasons.

Evidence matching is deliberately naive: a description keyword (length > 3)
appearing as a substring of the lowercased note counts, so "no sign of
diabetes" still matches "diabetes". Negation and the stored exclusion rules
are out of scope by design.
"""

from __future__ import annotations

from dataclasses import dataclass

from .coder import CandidateCode
from .exceptions import MissingEntryError
from .kb import KnowledgeBase, description_keywords, is_valid_icd10_format

REASON_ACCEPTED = "accepted_with_evidence"
REASON_NOT_IN_KB = "not_in_kb"
REASON_NO_EVIDENCE = "no_evidence"
REASON_INVALID_FORMAT = "invalid_format"


@dataclass(frozen=True)
class AuditVerdict:
    original_code: str
    normalized_code: str
    accepted: bool
    reason: str
    matched_keywords: tuple[str, ...]
    reasoning: str

    def to_dict(self) -> dict:
        return {
            "original_code": self.original_code,
            "normalized_code": self.normalized_code,
            "accepted": self.accepted,
            "reason": self.reason,
            "matched_keywords": list(self.matched_keywords),
            "reasoning": self.reasoning,
        }


def normalize_format(code: str, kb: KnowledgeBase) -> str:
    """Uppercase, then repair a missing dot when the repair lands in the KB.

    "M602" becomes "M60.2" only if M60.2 is a KB member; otherwise the
    uppercased input is returned unchanged. Idempotent.
    """
    up = code.upper()
    if len(up) > 3 and "." not in up:
        dotted = up[:3] + "." + up[3:]
        if dotted in kb:
            return dotted
    return up


def validate_code(code: str, kb: KnowledgeBase) -> bool:
    """Exact KB membership of an already-normalized code."""
    return code in kb


def check_evidence(code: str, text: str, kb: KnowledgeBase) -> tuple[bool, list[str]]:
    """Which description keywords of `code` occur in the text (substring, lowercased)."""
    entry = kb.lookup(code)
    if entry is None:
        raise MissingEntryError(f"{code} is not in the KB; validate before checking evidence")
    lowered = text.lower()
    matched = [w for w in description_keywords(entry) if w.lower() in lowered]
    return (len(matched) > 0, matched)


def _reasoning(original: str, normalized: str, kb_step: str, evidence_step: str) -> str:
    return f"[format] {original}→{normalized} | [kb] {kb_step} | [evidence] {evidence_step}"


def audit(candidate: CandidateCode, text: str, kb: KnowledgeBase) -> AuditVerdict:
    """Verify one candidate; every failure mode is a verdict, never an exception."""
    normalized = normalize_format(candidate.code, kb)
    if not is_valid_icd10_format(normalized):
        return AuditVerdict(
            original_code=candidate.code, normalized_code=normalized, accepted=False,
            reason=REASON_INVALID_FORMAT, matched_keywords=(),
            reasoning=_reasoning(candidate.code, normalized, "skipped", "skipped"),
        )
    if not validate_code(normalized, kb):
        # Early rejection: no evidence scan for codes outside the KB.
        return AuditVerdict(
            original_code=candidate.code, normalized_code=normalized, accepted=False,
            reason=REASON_NOT_IN_KB, matched_keywords=(),
            reasoning=_reasoning(candidate.code, normalized, "miss", "skipped"),
        )
    supported, matched = check_evidence(normalized, text, kb)
    evidence_step = f"{len(matched)} keyword(s): {', '.join(matched) if matched else 'none'}"
    if supported:
        return AuditVerdict(
            original_code=candidate.code, normalized_code=normalized, accepted=True,
            reason=REASON_ACCEPTED, matched_keywords=tuple(matched),
            reasoning=_reasoning(candidate.code, normalized, "hit", evidence_step),
        )
    return AuditVerdict(
        original_code=candidate.code, normalized_code=normalized, accepted=False,
        reason=REASON_NO_EVIDENCE, matched_keywords=(),
        reasoning=_reasoning(candidate.code, normalized, "hit", evidence_step),
    )


def audit_all(candidates: list[CandidateCode], text: str, kb: KnowledgeBase) -> list[AuditVerdict]:
    """Element-wise audit; no cross-candidate interaction, no dedup here."""
    return [audit(c, text, kb) for c in candidates]

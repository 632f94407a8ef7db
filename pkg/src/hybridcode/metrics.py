"""Batch aggregates: code classification, coverage, tier split, Wilson CIs.

Counts are derived solely from CaseResults and cross-checked against the
internal identities (class partition sums to the total, accepted plus
rejected equals the total in full mode, zero accepted-outside-KB codes in
full mode). An identity violation raises rather than producing a report,
because it means the pipeline itself is broken.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

from .auditor import REASON_INVALID_FORMAT, REASON_NO_EVIDENCE, REASON_NOT_IN_KB, normalize_format
from .coder import ORIGIN_MODEL
from .exceptions import ConfigError, DomainError, InconsistentResultsError
from .kb import KnowledgeBase, is_valid_icd10_format
from .orchestrator import MODE_CODER_ONLY, MODE_FULL, CaseResult

CLASS_IN_KB = "in_kb"
CLASS_VALID_OUTSIDE_KB = "valid_format_outside_kb"
CLASS_INVALID_FORMAT = "invalid_format"
CODE_CLASSES = (CLASS_IN_KB, CLASS_VALID_OUTSIDE_KB, CLASS_INVALID_FORMAT)

REJECTION_REASONS = (REASON_NO_EVIDENCE, REASON_NOT_IN_KB, REASON_INVALID_FORMAT)


def classify_code(code: str, kb: KnowledgeBase) -> str:
    """Classify the post-normalization form of a proposed code."""
    normalized = normalize_format(code, kb)
    if not is_valid_icd10_format(normalized):
        return CLASS_INVALID_FORMAT
    if normalized in kb:
        return CLASS_IN_KB
    return CLASS_VALID_OUTSIDE_KB


def wilson_ci(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clamped to [0,1].

    The zero- and full-success boundaries are returned as exact 0.0 / 1.0,
    which is their true Wilson value (the general float expression can land
    a few ulp off).
    """
    if trials == 0:
        raise DomainError("wilson_ci needs trials >= 1; report a null CI instead")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes {successes} outside [0, {trials}]")
    low, high = _wilson_from_proportion(successes / trials, trials, z)
    if successes == 0:
        low = 0.0
    if successes == trials:
        high = 1.0
    return (low, high)


def _wilson_from_proportion(p: float, n: int, z: float = 1.96) -> tuple[float, float]:
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass
class RunReport:
    mode: str
    total_cases: int
    total_codes_proposed: int
    avg_codes_per_case: float | None
    class_counts: dict[str, int]
    class_percents: dict[str, float | None]
    invalid_format_raw: int
    invalid_format_normalized: int
    codes_accepted: int
    codes_rejected: int
    accepted_percent: float | None
    rejected_percent: float | None
    coverage: float | None
    coverage_ci_per_code: tuple[float, float] | None
    coverage_ci_per_case: tuple[float, float] | None
    hallucination_count: int
    model_tier_fraction: float | None
    fallback_tier_fraction: float | None
    rejection_reasons: dict[str, int]
    timing_ms: dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timings: bool = False) -> dict:
        doc = {
            "mode": self.mode,
            "total_cases": self.total_cases,
            "total_codes_proposed": self.total_codes_proposed,
            "avg_codes_per_case": self.avg_codes_per_case,
            "code_classes": {
                name: {"count": self.class_counts[name], "percent": self.class_percents[name]}
                for name in CODE_CLASSES
            },
            "invalid_format_raw": self.invalid_format_raw,
            "invalid_format_normalized": self.invalid_format_normalized,
            "codes_accepted": {"count": self.codes_accepted, "percent": self.accepted_percent},
            "codes_rejected": {"count": self.codes_rejected, "percent": self.rejected_percent},
            "coverage": self.coverage,
            "coverage_ci_per_code": _ci_dict(self.coverage_ci_per_code),
            "coverage_ci_per_case": _ci_dict(self.coverage_ci_per_case),
            "hallucination_count": self.hallucination_count,
            "tier_fractions": {
                "model": self.model_tier_fraction,
                "fallback": self.fallback_tier_fraction,
            },
            "rejection_reasons": dict(self.rejection_reasons),
        }
        if include_timings:
            doc["timing_ms"] = dict(self.timing_ms)
        return doc


def _ci_dict(ci: tuple[float, float] | None) -> dict | None:
    if ci is None:
        return None
    return {"low": ci[0], "high": ci[1]}


def _percent(count: int, total: int) -> float | None:
    if total == 0:
        return None
    return 100.0 * count / total


def summarize(results: list[CaseResult], kb: KnowledgeBase, mode: str) -> RunReport:
    """Aggregate per-case results into the run report, verifying identities."""
    if mode not in (MODE_FULL, MODE_CODER_ONLY):
        raise ConfigError(f"unknown mode {mode!r}")
    total_cases = len(results)
    total_codes = 0
    class_counts = {name: 0 for name in CODE_CLASSES}
    invalid_raw = 0
    model_codes = 0
    accepted = 0
    rejected = 0
    hallucinations = 0
    reasons = {name: 0 for name in REJECTION_REASONS}
    propose_ms = 0.0
    audit_ms = 0.0
    total_ms = 0.0

    for result in results:
        candidates = result.candidates
        verdicts = result.verdicts
        if mode == MODE_FULL and len(verdicts) != len(candidates):
            raise InconsistentResultsError(
                f"case {result.case_id}: {len(verdicts)} verdicts for "
                f"{len(candidates)} candidates")
        if mode == MODE_CODER_ONLY and verdicts:
            raise InconsistentResultsError(
                f"case {result.case_id}: verdicts present in coder_only mode")

        total_codes += len(candidates)
        for i, cand in enumerate(candidates):
            normalized = normalize_format(cand.code, kb)
            class_counts[classify_code(cand.code, kb)] += 1
            if not is_valid_icd10_format(cand.code):
                invalid_raw += 1
            if cand.origin == ORIGIN_MODEL:
                model_codes += 1
            if mode == MODE_FULL:
                verdict = verdicts[i]
                if verdict.normalized_code != normalized:
                    raise InconsistentResultsError(
                        f"case {result.case_id}: verdict normalization "
                        f"{verdict.normalized_code!r} != {normalized!r}")
                if verdict.accepted:
                    accepted += 1
                    if normalized not in kb:
                        hallucinations += 1
                else:
                    rejected += 1
                    reasons[verdict.reason] += 1
            else:
                # Ablation: everything is accepted, including junk.
                accepted += 1
                if normalized not in kb:
                    hallucinations += 1
        propose_ms += result.timings.get("propose_ms", 0.0)
        audit_ms += result.timings.get("audit_ms", 0.0)
        total_ms += result.timings.get("total_ms", 0.0)

    if sum(class_counts.values()) != total_codes:
        raise InconsistentResultsError("code classes do not partition the proposed total")
    if mode == MODE_FULL and accepted + rejected != total_codes:
        raise InconsistentResultsError("accepted + rejected != total proposed in full mode")
    if mode == MODE_FULL and hallucinations != 0:
        raise InconsistentResultsError(
            f"{hallucinations} accepted code(s) outside the KB; the auditor is broken")

    in_kb = class_counts[CLASS_IN_KB]
    coverage = in_kb / total_codes if total_codes else None
    ci_per_code = wilson_ci(in_kb, total_codes) if total_codes else None
    # The per-case interval treats each case as one trial at the observed
    # coverage proportion; this is the basis that reproduces a 1,000-case CI.
    ci_per_case = (
        _wilson_from_proportion(coverage, total_cases)
        if total_cases and coverage is not None else None
    )

    return RunReport(
        mode=mode,
        total_cases=total_cases,
        total_codes_proposed=total_codes,
        avg_codes_per_case=(total_codes / total_cases if total_cases else None),
        class_counts=class_counts,
        class_percents={name: _percent(class_counts[name], total_codes)
                        for name in CODE_CLASSES},
        invalid_format_raw=invalid_raw,
        invalid_format_normalized=class_counts[CLASS_INVALID_FORMAT],
        codes_accepted=accepted,
        codes_rejected=rejected,
        accepted_percent=_percent(accepted, total_codes),
        rejected_percent=_percent(rejected, total_codes),
        coverage=coverage,
        coverage_ci_per_code=ci_per_code,
        coverage_ci_per_case=ci_per_case,
        hallucination_count=hallucinations,
        model_tier_fraction=(model_codes / total_codes if total_codes else None),
        fallback_tier_fraction=((total_codes - model_codes) / total_codes
                                if total_codes else None),
        rejection_reasons=reasons,
        timing_ms={
            "propose_total": propose_ms,
            "audit_total": audit_ms,
            "run_total": total_ms,
            "audit_share": (audit_ms / total_ms if total_ms > 0 else 0.0),
        },
    )


def _fmt_percent(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}%"


def report_table_rows(report: RunReport) -> list[tuple[str, str, str]]:
    """Rows of the companion CSV, one per headline metric."""
    cov_pct = None if report.coverage is None else 100.0 * report.coverage
    return [
        ("Total Cases Processed", str(report.total_cases), ""),
        ("Total Codes Proposed", str(report.total_codes_proposed),
         _fmt_percent(100.0 if report.total_codes_proposed else None)),
        ("Average Codes per Case",
         "" if report.avg_codes_per_case is None else f"{report.avg_codes_per_case:.2f}", ""),
        ("Codes in Knowledge Base", str(report.class_counts[CLASS_IN_KB]),
         _fmt_percent(report.class_percents[CLASS_IN_KB])),
        ("Valid Format, Outside KB", str(report.class_counts[CLASS_VALID_OUTSIDE_KB]),
         _fmt_percent(report.class_percents[CLASS_VALID_OUTSIDE_KB])),
        ("Invalid Format Codes", str(report.class_counts[CLASS_INVALID_FORMAT]),
         _fmt_percent(report.class_percents[CLASS_INVALID_FORMAT])),
        ("Codes Verified (Accepted)", str(report.codes_accepted),
         _fmt_percent(report.accepted_percent)),
        ("Codes Rejected (Total)", str(report.codes_rejected),
         _fmt_percent(report.rejected_percent)),
        ("Coverage (Codes in KB)", str(report.class_counts[CLASS_IN_KB]), _fmt_percent(cov_pct)),
        ("Hallucination Count (Final)", str(report.hallucination_count), ""),
    ]


def write_report_csv(report: RunReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "count", "percentage"])
        writer.writerows(report_table_rows(report))

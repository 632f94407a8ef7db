"""HTTP facade over the pipeline for interactive, multi-client use.

The service loads one KB/map bundle at startup and answers per-note
requests; batch runs stay on the CLI. Started without a model source it
degrades to the deterministic fallback tier, which is often exactly what a
demo box wants.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .auditor import audit
from .clients import ModelClient, NullClient
from .coder import (
    DEFAULT_TRUNCATE_LIMIT,
    CandidateCode,
    ClinicalNote,
    ORIGIN_MODEL,
    propose,
)
from .kb import AbbreviationMap, KeywordMap, KnowledgeBase
from .orchestrator import MODE_FULL, MODES, RunConfig, process_case


class AuditRequest(BaseModel):
    code: str
    text: str


class VerdictResponse(BaseModel):
    original_code: str
    normalized_code: str
    accepted: bool
    reason: str
    matched_keywords: list[str]
    reasoning: str


class NoteRequest(BaseModel):
    case_id: str = Field(min_length=1)
    text: str


class CandidateResponse(BaseModel):
    code: str
    diagnosis: str
    confidence: float
    origin: str


class ProposeResponse(BaseModel):
    candidates: list[CandidateResponse]
    tier: str


class ProcessRequest(NoteRequest):
    mode: str = MODE_FULL


class CaseResponse(BaseModel):
    case_id: str
    candidates: list[CandidateResponse]
    verdicts: list[VerdictResponse]
    accepted_codes: list[str]
    tier_used: str


def create_app(kb: KnowledgeBase, kmap: KeywordMap, amap: AbbreviationMap,
               client: ModelClient | None = None,
               truncate_limit: int = DEFAULT_TRUNCATE_LIMIT) -> FastAPI:
    app = FastAPI(title="hybridcode", version="0.1.0")
    model_client = client if client is not None else NullClient()

    @app.get("/health")
    def health():
        return {"status": "ok", "kb_size": kb.size}

    @app.post("/audit", response_model=VerdictResponse)
    def audit_code(req: AuditRequest):
        candidate = CandidateCode(code=req.code, diagnosis="", confidence=1.0,
                                  origin=ORIGIN_MODEL)
        return VerdictResponse(**audit(candidate, req.text, kb).to_dict())

    @app.post("/process", response_model=CaseResponse)
    def process(req: ProcessRequest):
        if req.mode not in MODES:
            raise HTTPException(status_code=400, detail=f"unknown mode {req.mode!r}")
        cfg = RunConfig(mode=req.mode, truncate_limit=truncate_limit)
        note = ClinicalNote(case_id=req.case_id, text=req.text)
        result = process_case(note, cfg, kb, kmap, amap, model_client)
        return CaseResponse(**result.to_dict())

    @app.post("/propose", response_model=ProposeResponse)
    def propose_codes(req: NoteRequest):
        note = ClinicalNote(case_id=req.case_id, text=req.text)
        result = propose(note, model_client, kmap, amap, truncate_limit=truncate_limit)
        return ProposeResponse(
            candidates=[CandidateResponse(code=c.code, diagnosis=c.diagnosis,
                                          confidence=c.confidence, origin=c.origin)
                        for c in result.candidates],
            tier=result.tier,
        )

    return app

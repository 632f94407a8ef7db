"""FastAPI app speaking the /generate wire contract.

Malformed request bodies come back as 400 (not FastAPI's default 422) and
backend failures as 500; clients treat both as a dead model and fall back.
Prompts are never logged unless the app was built with debug_log=True.
"""

from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .backends import BackendError

logger = logging.getLogger("model_server")


class GenerateRequest(BaseModel):
    prompt: str
    temperature: float = 0.1
    max_new_tokens: int = 512
    seed: int | None = None


class GenerateResponse(BaseModel):
    text: str
    model_id: str
    latency_ms: float


def create_app(backend, debug_log: bool = False) -> FastAPI:
    app = FastAPI(title="hybridcode model server", version="0.1.0")

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": "malformed request body"})

    @app.get("/health")
    def health():
        return {"status": "ok", "backend": backend.name}

    @app.post("/generate", response_model=GenerateResponse)
    def generate(req: GenerateRequest):
        if debug_log:
            logger.info("prompt (%d chars): %s", len(req.prompt), req.prompt)
        try:
            text, latency_ms = backend.generate(
                req.prompt, req.temperature, req.max_new_tokens, req.seed)
        except BackendError as exc:
            return JSONResponse(status_code=500, content={"detail": str(exc)})
        return GenerateResponse(text=text, model_id=backend.model_id,
                                latency_ms=latency_ms)

    return app

"""Model client contract plus the two shipped implementations.

Both the in-process scripted stub and the HTTP shim speak the same request
and response shapes, so the pipeline cannot tell them apart. Every failure
mode (transport, timeout, non-2xx, malformed body, no matching rule) raises
ModelClientError, which the coder converts into a fallback activation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import httpx

from .exceptions import MalformedDocumentError, MissingFileError, ModelClientError

DEFAULT_TEMPERATURE = 0.1
DEFAULT_MAX_NEW_TOKENS = 512
DEFAULT_TIMEOUT_MS = 30_000


@dataclass(frozen=True)
class ModelRequest:
    prompt: str
    temperature: float = DEFAULT_TEMPERATURE
    max_new_tokens: int = DEFAULT_MAX_NEW_TOKENS
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


@dataclass(frozen=True)
class ModelResponse:
    text: str
    latency_ms: float
    model_id: str


class ModelClient(Protocol):
    def generate(self, request: ModelRequest) -> ModelResponse: ...


class ScriptedClient:
    """Deterministic stub driven by a rules fixture.

    The fixture is a JSON array of ``{"match": substring, "text": canned}``
    rules; the first rule whose ``match`` occurs in the prompt wins. No match
    is a client failure, exactly like a dead endpoint.
    """

    model_id = "scripted-stub"

    def __init__(self, rules: list[dict]):
        for i, rule in enumerate(rules):
            if not isinstance(rule, dict) or not isinstance(rule.get("match"), str) \
                    or not isinstance(rule.get("text"), str):
                raise MalformedDocumentError(f"stub rule {i} must be {{'match','text'}}")
        self._rules = [(r["match"], r["text"]) for r in rules]

    @classmethod
    def from_file(cls, path) -> "ScriptedClient":
        path = Path(path)
        if not path.is_file():
            raise MissingFileError(f"stub fixture not found: {path}")
        try:
            rules = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise MalformedDocumentError(f"{path} is not valid JSON: {exc}") from exc
        if not isinstance(rules, list):
            raise MalformedDocumentError(f"{path}: top level must be a JSON array")
        return cls(rules)

    def generate(self, request: ModelRequest) -> ModelResponse:
        for match, text in self._rules:
            if match in request.prompt:
                return ModelResponse(text=text, latency_ms=0.0, model_id=self.model_id)
        raise ModelClientError("no stub rule matched the prompt")


class NullClient:
    """Client for fallback-only operation; every call fails."""

    def generate(self, request: ModelRequest) -> ModelResponse:
        raise ModelClientError("no model configured")


class HttpModelClient:
    """Client for the ``POST /generate`` wire contract."""

    def __init__(self, endpoint: str, timeout_ms: int = DEFAULT_TIMEOUT_MS):
        self._url = endpoint.rstrip("/") + "/generate"
        self._client = httpx.Client(timeout=timeout_ms / 1000.0)

    def generate(self, request: ModelRequest) -> ModelResponse:
        body = {
            "prompt": request.prompt,
            "temperature": request.temperature,
            "max_new_tokens": request.max_new_tokens,
            "seed": request.seed,
        }
        try:
            resp = self._client.post(self._url, json=body)
        except httpx.HTTPError as exc:
            raise ModelClientError(f"transport failure: {exc}") from exc
        if resp.status_code < 200 or resp.status_code >= 300:
            raise ModelClientError(f"endpoint returned HTTP {resp.status_code}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ModelClientError("endpoint returned a non-JSON body") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("text"), str) \
                or not isinstance(payload.get("model_id"), str) \
                or not isinstance(payload.get("latency_ms"), (int, float)):
            raise ModelClientError("endpoint response missing text/model_id/latency_ms")
        return ModelResponse(text=payload["text"], latency_ms=float(payload["latency_ms"]),
                             model_id=payload["model_id"])

    def close(self):
        self._client.close()

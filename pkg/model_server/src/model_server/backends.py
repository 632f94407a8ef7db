"""Generation backends behind the /generate endpoint.

MockBackend answers from a canned-rules file and is fully deterministic;
LocalBackend wraps a locally stored causal language model. Both return the
continuation text only, never an echo of the prompt.
"""

from __future__ import annotations

import json
import threading
import time
from pathlib import Path


class BackendError(Exception):
    """Generation failed; the server maps this to HTTP 500."""


class MockBackend:
    """First-match canned responses, same fixture format as the in-process stub.

    Rules: JSON array of {"match": substring-of-prompt, "text": canned}.
    No matching rule is a backend failure, which clients treat exactly like
    a dead model.
    """

    name = "mock"
    model_id = "mock"

    def __init__(self, rules: list[dict]):
        for i, rule in enumerate(rules):
            if not isinstance(rule, dict) or not isinstance(rule.get("match"), str) \
                    or not isinstance(rule.get("text"), str):
                raise ValueError(f"rule {i} must be {{'match': str, 'text': str}}")
        self._rules = [(r["match"], r["text"]) for r in rules]

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        rules = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(rules, list):
            raise ValueError(f"{path}: top level must be a JSON array")
        return cls(rules)

    def generate(self, prompt: str, temperature: float, max_new_tokens: int,
                 seed: int | None) -> tuple[str, float]:
        for match, text in self._rules:
            if match in prompt:
                # latency pinned to 0.0 so identical requests yield
                # byte-identical response bodies across restarts
                return text, 0.0
        raise BackendError("no rule matched the prompt")


class LocalBackend:
    """Causal-LM generation via transformers, loaded from a local path.

    Requests are serialized with a lock; generation on a shared model is not
    safe to interleave, and queueing satisfies the concurrency contract.
    """

    name = "local"

    def __init__(self, model_path: str):
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover - env without the extra
            raise BackendError(
                "local backend needs the 'local' extra (transformers, torch)") from exc
        self._torch = torch
        self.model_id = str(model_path)
        self._tokenizer = AutoTokenizer.from_pretrained(model_path)
        dtype = torch.float16 if torch.cuda.is_available() else torch.float32
        self._model = AutoModelForCausalLM.from_pretrained(model_path, torch_dtype=dtype)
        if torch.cuda.is_available():  # pragma: no cover - CPU-only CI
            self._model = self._model.to("cuda")
        self._model.eval()
        self._lock = threading.Lock()

    def generate(self, prompt: str, temperature: float, max_new_tokens: int,
                 seed: int | None) -> tuple[str, float]:
        torch = self._torch
        start = time.monotonic()
        with self._lock:
            if seed is not None:
                torch.manual_seed(seed)
            inputs = self._tokenizer(prompt, return_tensors="pt").to(self._model.device)
            with torch.no_grad():
                output = self._model.generate(
                    **inputs,
                    max_new_tokens=max_new_tokens,
                    do_sample=temperature > 0,
                    temperature=temperature if temperature > 0 else None,
                    pad_token_id=self._tokenizer.eos_token_id,
                )
            # continuation only: slice off the prompt tokens before decoding
            new_tokens = output[0][inputs["input_ids"].shape[1]:]
            text = self._tokenizer.decode(new_tokens, skip_special_tokens=True)
        return text, (time.monotonic() - start) * 1000.0

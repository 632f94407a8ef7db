import pytest
from fastapi.testclient import TestClient

from hybridcode.clients import ModelResponse
from hybridcode.service import create_app

PAPER_ARRAY = '[{"code": "E11.9", "diagnosis": "Type 2 diabetes mellitus", "confidence": 0.9}]'


class CannedClient:
    def __init__(self, text):
        self.text = text

    def generate(self, request):
        return ModelResponse(text=self.text, latency_ms=0.0, model_id="canned")


@pytest.fixture()
def client(kb, kmap, amap):
    return TestClient(create_app(kb, kmap, amap))


@pytest.fixture()
def model_client(kb, kmap, amap):
    return TestClient(create_app(kb, kmap, amap, client=CannedClient(PAPER_ARRAY)))


def test_health(client, kb):
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json() == {"status": "ok", "kb_size": kb.size}


def test_audit_endpoint(client):
    resp = client.post("/audit", json={"code": "M602",
                                       "text": "foreign body granuloma in tissue"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["accepted"] is True
    assert body["normalized_code"] == "M60.2"


def test_audit_rejection_is_200(client):
    resp = client.post("/audit", json={"code": "CKD", "text": "anything"})
    assert resp.status_code == 200
    assert resp.json()["reason"] == "invalid_format"


def test_propose_fallback_without_model(client):
    resp = client.post("/propose", json={"case_id": "n1", "text": "asthma flare"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["tier"] == "fallback"
    assert [c["code"] for c in body["candidates"]] == ["J45.909"]
    assert all(c["confidence"] == 0.5 for c in body["candidates"])


def test_propose_model_tier(model_client):
    resp = model_client.post("/propose", json={"case_id": "n1", "text": "diabetes"})
    body = resp.json()
    assert body["tier"] == "model"
    assert [c["code"] for c in body["candidates"]] == ["E11.9"]


def test_process_full(model_client):
    resp = model_client.post("/process", json={"case_id": "n1",
                                               "text": "diabetes mellitus follow-up"})
    body = resp.json()
    assert body["accepted_codes"] == ["E11.9"]
    assert len(body["verdicts"]) == 1


def test_process_coder_only(model_client):
    resp = model_client.post("/process", json={"case_id": "n1", "text": "no evidence",
                                               "mode": "coder_only"})
    body = resp.json()
    assert body["accepted_codes"] == ["E11.9"]
    assert body["verdicts"] == []


def test_process_unknown_mode(client):
    resp = client.post("/process", json={"case_id": "n1", "text": "x", "mode": "turbo"})
    assert resp.status_code == 400


def test_validation_error_on_missing_fields(client):
    resp = client.post("/audit", json={"code": "I10"})
    assert resp.status_code == 422

import json

import pytest

from conftest import ABBREVS_PATH, CORPUS_PATH, KB_PATH, KEYWORDS_PATH, STUB_PATH
from hybridcode.cli import main


def run_cli(*argv):
    return main([str(a) for a in argv])


def run_args(out_dir, mode="full", **overrides):
    args = {
        "--corpus": CORPUS_PATH, "--kb": KB_PATH, "--keywords": KEYWORDS_PATH,
        "--abbrevs": ABBREVS_PATH, "--mode": mode, "--model-script": STUB_PATH,
        "--out": out_dir,
    }
    args.update(overrides)
    argv = ["run"]
    for flag, value in args.items():
        argv += [flag, value]
    return argv


class TestRun:
    def test_writes_outputs(self, tmp_path, capsys):
        assert run_cli(*run_args(tmp_path / "out")) == 0
        assert (tmp_path / "out" / "cases.jsonl").is_file()
        assert (tmp_path / "out" / "report.json").is_file()
        assert (tmp_path / "out" / "report.csv").is_file()
        captured = capsys.readouterr()
        assert captured.out == ""  # machine output goes to files, not stdout
        assert "Total Codes Proposed" in captured.err

    def test_coder_only_rejects_nothing(self, tmp_path):
        assert run_cli(*run_args(tmp_path / "out", mode="coder-only")) == 0
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert report["codes_rejected"]["count"] == 0
        assert report["codes_accepted"]["count"] == report["total_codes_proposed"]

    def test_missing_kb_exits_2_without_outputs(self, tmp_path):
        out = tmp_path / "out"
        code = run_cli(*run_args(out, **{"--kb": tmp_path / "absent.json"}))
        assert code == 2
        assert not out.exists()

    def test_corpus_error_exits_1(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"case_id": "a", "text": "x"}\nnot json\n', encoding="utf-8")
        assert run_cli(*run_args(tmp_path / "out", **{"--corpus": bad})) == 1

    def test_flag_typo_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run_cli("run", "--corpse", "x")
        assert exc.value.code == 2

    def test_both_model_sources_rejected(self, tmp_path):
        argv = run_args(tmp_path / "out")
        argv += ["--model-endpoint", "http://127.0.0.1:1"]
        assert run_cli(*argv) == 2

    def test_endpoint_env_fallback(self, tmp_path, monkeypatch):
        # Endpoint from env, nothing listening: every case falls back, run completes.
        monkeypatch.setenv("HYBRID_CODE_MODEL_ENDPOINT", "http://127.0.0.1:9")
        argv = [a for a in run_args(tmp_path / "out", **{"--timeout-ms": "200"})]
        idx = argv.index("--model-script")
        del argv[idx:idx + 2]
        assert run_cli(*argv) == 0
        cases = (tmp_path / "out" / "cases.jsonl").read_text().splitlines()
        assert len(cases) == 50
        assert all(json.loads(c)["tier_used"] == "fallback" for c in cases)

    def test_emit_timings_adds_fields(self, tmp_path):
        argv = run_args(tmp_path / "out") + ["--emit-timings"]
        assert run_cli(*argv) == 0
        first = json.loads((tmp_path / "out" / "cases.jsonl").read_text().splitlines()[0])
        assert "timings" in first
        report = json.loads((tmp_path / "out" / "report.json").read_text())
        assert "timing_ms" in report


class TestAudit:
    def test_correctable_code(self, capsys):
        code = run_cli("audit", "--code", "M602",
                       "--text", "foreign body granuloma in muscle tissue",
                       "--kb", KB_PATH)
        assert code == 0
        verdict = json.loads(capsys.readouterr().out)
        assert verdict["accepted"] is True
        assert verdict["normalized_code"] == "M60.2"

    def test_rejected_is_still_exit_zero(self, capsys):
        code = run_cli("audit", "--code", "E11.9", "--text", "cough", "--kb", KB_PATH)
        assert code == 0
        verdict = json.loads(capsys.readouterr().out)
        assert verdict["reason"] == "no_evidence"

    def test_invalid_format(self, capsys):
        assert run_cli("audit", "--code", "CKD", "--text", "x", "--kb", KB_PATH) == 0
        verdict = json.loads(capsys.readouterr().out)
        assert verdict["reason"] == "invalid_format"

    def test_bad_kb_exits_2(self, tmp_path):
        assert run_cli("audit", "--code", "I10", "--text", "x",
                       "--kb", tmp_path / "absent.json") == 2


class TestValidateKb:
    def test_shipped_fixtures_pass(self, capsys):
        assert run_cli("validate-kb", "--kb", KB_PATH, "--keywords", KEYWORDS_PATH,
                       "--abbrevs", ABBREVS_PATH) == 0

    def test_dangling_keyword_named(self, tmp_path, capsys):
        kw = tmp_path / "kw.json"
        kw.write_text(json.dumps([{"keyword": "cholera", "code": "A00.0"}]),
                      encoding="utf-8")
        code = run_cli("validate-kb", "--kb", KB_PATH, "--keywords", kw,
                       "--abbrevs", ABBREVS_PATH)
        assert code == 1
        err = capsys.readouterr().err
        assert "cholera" in err and "A00.0" in err

    def test_invalid_kb_key(self, tmp_path, capsys):
        kb = tmp_path / "kb.json"
        kb.write_text(json.dumps({"CKD": {"description": "x", "rules": []}}),
                      encoding="utf-8")
        kw = tmp_path / "kw.json"
        kw.write_text("[]", encoding="utf-8")
        code = run_cli("validate-kb", "--kb", kb, "--keywords", kw, "--abbrevs", kw)
        assert code == 1
        assert "InvalidCode" in capsys.readouterr().err

    def test_one_line_per_violation(self, tmp_path, capsys):
        kb = tmp_path / "kb.json"
        kb.write_text(json.dumps({
            "CKD": {"description": "x", "rules": []},
            "E11.9": {"description": "", "rules": []},
            "I10": {"description": "fine words", "rules": []},
        }), encoding="utf-8")
        kw = tmp_path / "kw.json"
        kw.write_text(json.dumps([{"keyword": "pneumonia", "code": "J18.9"}]),
                      encoding="utf-8")
        ab = tmp_path / "ab.json"
        ab.write_text("[]", encoding="utf-8")
        assert run_cli("validate-kb", "--kb", kb, "--keywords", kw, "--abbrevs", ab) == 1
        lines = [l for l in capsys.readouterr().err.splitlines() if l]
        assert len(lines) == 3  # CKD key, empty description, dangling J18.9

    def test_unreadable_exits_2(self, tmp_path):
        assert run_cli("validate-kb", "--kb", tmp_path / "absent.json",
                       "--keywords", KEYWORDS_PATH, "--abbrevs", ABBREVS_PATH) == 2


class TestFilter:
    def test_default_terms(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text('{"case_id": "a", "text": "Pt with asthma"}\n'
                          '{"case_id": "b", "text": "fracture"}\n'
                          '{"case_id": "c", "text": "DIABETES follow-up"}\n',
                          encoding="utf-8")
        out = tmp_path / "kept.jsonl"
        assert run_cli("filter", "--corpus", corpus, "--out", out) == 0
        kept = [json.loads(l)["case_id"] for l in out.read_text().splitlines()]
        assert kept == ["a", "c"]

    def test_custom_terms(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text('{"case_id": "a", "text": "melena noted"}\n', encoding="utf-8")
        out = tmp_path / "kept.jsonl"
        assert run_cli("filter", "--corpus", corpus, "--out", out,
                       "--terms", "melena,varices") == 0
        assert len(out.read_text().splitlines()) == 1

    def test_empty_terms_exit_2(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text('{"case_id": "a", "text": "x"}\n', encoding="utf-8")
        assert run_cli("filter", "--corpus", corpus, "--out", tmp_path / "o.jsonl",
                       "--terms", " , ") == 2

    def test_corpus_error_exit_1(self, tmp_path):
        corpus = tmp_path / "c.jsonl"
        corpus.write_text("borked\n", encoding="utf-8")
        assert run_cli("filter", "--corpus", corpus, "--out", tmp_path / "o.jsonl") == 1

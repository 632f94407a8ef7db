import sys
from pathlib import Path

import pytest

import hybridcode as hc

sys.path.insert(0, str(Path(__file__).parent))

PKG_DATA = Path(hc.__file__).parent / "data"
TEST_DATA = Path(__file__).parent / "data"

KB_PATH = PKG_DATA / "icd10_rules.json"
KEYWORDS_PATH = PKG_DATA / "keyword_map.json"
ABBREVS_PATH = PKG_DATA / "abbrev_map.json"
CORPUS_PATH = TEST_DATA / "corpus_50.jsonl"
STUB_PATH = TEST_DATA / "stub_rules.json"
GOLDEN_REPORT = TEST_DATA / "golden_report.json"
GOLDEN_CASES = TEST_DATA / "golden_cases.jsonl"


@pytest.fixture(scope="session")
def kb():
    return hc.load_kb(KB_PATH)


@pytest.fixture(scope="session")
def kmap(kb):
    return hc.load_keyword_map(KEYWORDS_PATH, kb)


@pytest.fixture(scope="session")
def amap(kb):
    return hc.load_abbrev_map(ABBREVS_PATH, kb)


@pytest.fixture(scope="session")
def corpus():
    return hc.read_corpus(CORPUS_PATH)


@pytest.fixture(scope="session")
def stub_client():
    return hc.ScriptedClient.from_file(STUB_PATH)


@pytest.fixture(scope="session")
def kb_descriptions(kb):
    # Plain-dict view handed to the independent oracle.
    return {code: kb.lookup(code).description for code in kb.codes()}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(name): acceptance criterion; reported pass/fail by name")
    config._acceptance_results = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        item.config._acceptance_results.append(
            (marker.args[0], report.outcome, dict(report.user_properties)))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance_results", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, props in results:
        status = "PASS" if outcome == "passed" else "FAIL"
        extra = "".join(f" [{k}={v}]" for k, v in props.items())
        terminalreporter.write_line(f"[{status}] {name}{extra}")

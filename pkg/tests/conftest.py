from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(Path(__file__).resolve().parent))

from prose2dp.grammar import desugar, parse_grammar  # noqa: E402
from prose2dp.prompting import load_examples  # noqa: E402

FIXTURES = ROOT / "fixtures"
CORPUS = ROOT / "corpus"
TEST_FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture(scope="session")
def full():
    return desugar(parse_grammar((FIXTURES / "lucid_subset.gram").read_text(), name="lucid_subset"))


@pytest.fixture(scope="session")
def array_subset_text():
    return (FIXTURES / "nat_array_subset.gram").read_text()


@pytest.fixture(scope="session")
def examples(full):
    return load_examples(CORPUS / "examples", full)


ARRAY_PROGRAM = "global Array.t<<32>> nat_to_port  = Array.create(NUM_PORTS);\n"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.call_report = rep


@pytest.fixture
def criterion(request):
    """Print one PASS/FAIL line for the acceptance criterion a test checks."""
    label = request.node.get_closest_marker("criterion").args[0]
    yield
    rep = getattr(request.node, "call_report", None)
    status = "PASS" if rep is not None and rep.passed else "FAIL"
    reporter = request.config.pluginmanager.getplugin("terminalreporter")
    line = f"[acceptance] {label}: {status}"
    if reporter is not None:
        reporter.write_line(line)
    else:
        print(line)

import re
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pieceful.syntax import parse_program  # noqa: E402

RULESETS = Path(__file__).resolve().parent.parent / "rulesets"

_acceptance: dict = {}


def load(name: str):
    return parse_program((RULESETS / f"{name}.ruleset").read_text())


@pytest.fixture
def prime():
    return load("prime").rules


@pytest.fixture
def unfolding():
    return load("unfolding").rules


@pytest.fixture
def three_rules():
    return load("three_rules").rules


@pytest.fixture
def mapping():
    return load("mapping")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = re.match(r"test_ac(\d+)_", item.name)
    if m and item.module.__name__.endswith("test_acceptance") and (rep.when == "call" or rep.failed):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        prev = _acceptance.get(int(m.group(1)), (doc, True))
        _acceptance[int(m.group(1))] = (doc, prev[1] and rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_acceptance):
        doc, ok = _acceptance[num]
        terminalreporter.write_line(f"AC{num:02d} {'PASS' if ok else 'FAIL'}  {doc}")

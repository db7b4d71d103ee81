"""Shared fixtures and the per-criterion PASS/FAIL summary for the acceptance suite.

Acceptance tests carry ``@pytest.mark.criterion(n, "title")``; a criterion
passes when every test marked with its number passed.
"""
from __future__ import annotations

import pytest

from mvhbond import REFERENCE_PARAMS, NumericsConfig

_TITLES: dict[int, str] = {}
_OUTCOMES: dict[int, list[bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            number, title = mark.args
            _TITLES[number] = title
            _OUTCOMES.setdefault(number, [])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number = mark.args[0]
    if rep.when == "call" or rep.failed:
        _OUTCOMES[number].append(rep.passed and rep.when == "call")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _TITLES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_TITLES):
        results = _OUTCOMES.get(number, [])
        status = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {number}: {_TITLES[number]}")


@pytest.fixture(scope="session")
def params():
    return REFERENCE_PARAMS


@pytest.fixture(scope="session")
def numerics():
    return NumericsConfig()


@pytest.fixture(autouse=True)
def _fixed_timestamp(monkeypatch):
    # manifests embed a timestamp; pin it so outputs compare byte for byte
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")

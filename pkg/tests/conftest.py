import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}
_REPORT = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        # a criterion passes only if every test tagged with it passes
        prior = _CRITERIA.get(mark.args[0], (True, mark.args[1]))[0]
        _CRITERIA[mark.args[0]] = (prior and rep.passed, mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("measured values")
        for line in _REPORT:
            terminalreporter.write_line(line)
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        passed, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report():
    """Append a line to the measured-values section of the terminal summary."""
    return _REPORT.append

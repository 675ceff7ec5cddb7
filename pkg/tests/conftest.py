import numpy as np
import pytest

_CRITERIA = []


@pytest.fixture
def rng():
    return np.random.default_rng(20260117)


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the test's outcome decides PASS/FAIL."""
    entry = {"name": request.node.name, "detail": ""}
    _CRITERIA.append(entry)

    def note(detail):
        entry["detail"] = detail

    yield note
    entry["done"] = True


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        for entry in _CRITERIA:
            if entry["name"] == item.name:
                entry["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for entry in _CRITERIA:
        status = "PASS" if entry.get("passed") else "FAIL"
        terminalreporter.write_line(f"{status}  {entry['name']}  {entry['detail']}")

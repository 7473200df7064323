import numpy as np
import pytest

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record ``(label, passed, detail)`` for the end-of-run acceptance summary."""
    records = request.config.stash[_ACCEPTANCE]

    def record(label, passed, detail=""):
        records.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    records = config.stash.get(_ACCEPTANCE, [])
    if not records:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in records:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

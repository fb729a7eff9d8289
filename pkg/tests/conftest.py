import numpy as np
import pytest

from subhardy import QuadratureScheme

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scheme():
    return QuadratureScheme()


@pytest.fixture
def record(request):
    """Log one PASS/FAIL line for an acceptance criterion and assert it."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def rec(label: str, ok: bool, detail: str, elapsed: float, budget: float):
        in_time = elapsed < budget
        status = "PASS" if ok and in_time else "FAIL"
        line = f"{status} {label}: {detail} [{elapsed:.1f}s of {budget:.0f}s]"
        print(line)
        lines.append(line)
        assert ok, line
        assert in_time, line

    return rec


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from ensroc.votes import VoteMatrix

_ACCEPTANCE = []


@pytest.fixture
def record():
    """Collect one pass/fail line per acceptance criterion."""

    def _record(name, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def small_votes():
    # two negatives (k=0, k=4) and one positive (k=4) out of m=4
    return VoteMatrix(np.array([0, 4, 4]), 4, np.array([0, 0, 1]))


@pytest.fixture
def random_votes():
    rng = np.random.default_rng(11)
    n, m = 200, 32
    labels = np.repeat([0, 1], n // 2)
    p = np.where(labels == 1, rng.beta(3, 2, n), rng.beta(2, 3, n))
    return VoteMatrix(rng.binomial(m, p), m, labels)

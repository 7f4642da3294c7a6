import numpy as np
import pytest

from filtreg.data import from_right_censored


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_records():
    """Events at 1 and 2, one censoring at 1.5, all at the same covariate."""
    return from_right_censored([0.0, 0.0, 0.0], [1.0, 2.0, 5.0], [np.inf, np.inf, 1.5])


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request, capsys):
    """Record one acceptance line; it is printed now and again in the terminal summary."""

    def report(number, title, passed, detail):
        line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
        request.config.stash[_ACCEPTANCE].append((number, line))
        with capsys.disabled():
            print("\n" + line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)

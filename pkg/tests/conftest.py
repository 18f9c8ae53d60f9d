import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def table_1e6():
    from zetashift.arithmetic import sieve
    return sieve(10**6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def report(number, title, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

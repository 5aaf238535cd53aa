import pytest

from savanna_pdmp.core import figure_params

VERDICTS: list[str] = []


@pytest.fixture
def params():
    """Sample-path figure parameters: r_w=0.25, r_g=0.5, M_w=0.4, M_g=0.1, lambda=g."""
    return figure_params()


@pytest.fixture(scope="session")
def verdict():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(label, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {label}: {detail}"
        VERDICTS.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)

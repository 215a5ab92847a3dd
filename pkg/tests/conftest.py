import pytest

CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: call with (label, passed, detail)."""

    def record(label: str, passed: bool, detail: str) -> bool:
        CRITERIA.append(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)

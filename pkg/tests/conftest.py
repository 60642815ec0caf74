import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

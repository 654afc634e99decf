import pytest

ACCEPTANCE_LINES: dict[str, str] = {}


@pytest.fixture(scope="session")
def verdict():
    """Record one summary line per acceptance criterion; printed at the end of the session."""

    def record(criterion: int, title: str, ok: bool, detail: str) -> None:
        line = f"criterion {criterion} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES[f"{criterion:02d}"] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])

import pytest

ACCEPTANCE_LINES: dict[int, list[str]] = {}


@pytest.fixture
def record():
    """Record an acceptance verdict; the summary is printed at session end."""
    def _record(criterion: int, part: str, passed: bool, detail: str) -> bool:
        verdict = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.setdefault(criterion, []).append(f"{verdict} {part}: {detail}")
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(ACCEPTANCE_LINES):
        parts = ACCEPTANCE_LINES[criterion]
        overall = "PASS" if all(p.startswith("PASS") for p in parts) else "FAIL"
        terminalreporter.write_line(f"criterion {criterion:2d}: {overall}")
        for p in parts:
            terminalreporter.write_line(f"    {p}")

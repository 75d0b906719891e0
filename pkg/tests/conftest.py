import pytest

_REPORT = {}


@pytest.fixture
def report():
    """Record one PASS/FAIL line per acceptance criterion."""
    def _record(number, title, ok, detail):
        _REPORT[number] = f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}"
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_REPORT):
            terminalreporter.write_line(_REPORT[number])

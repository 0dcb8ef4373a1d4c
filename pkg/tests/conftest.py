import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one acceptance line; call before asserting so failures are reported too."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE_LINES.append((number, f"acceptance #{number} {'PASS' if ok else 'FAIL'}: {detail}"))
        print(_ACCEPTANCE_LINES[-1][1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES, key=lambda item: item[0]):
        terminalreporter.write_line(line)

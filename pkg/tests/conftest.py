import pytest

_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the lines are printed in the terminal summary."""

    def record(number, name, ok, detail):
        _LINES.append((number, f"{'PASS' if ok else 'FAIL'}  criterion {number}: {name} -- {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES, key=lambda x: x[0]):
            terminalreporter.write_line(line)

import pytest

# (criterion number, passed, detail) rows recorded by the acceptance suite
ACCEPTANCE_ROWS = []


@pytest.fixture
def report():
    def record(number, passed, detail):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_ROWS.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_ROWS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_ROWS):
        terminalreporter.write_line(line)

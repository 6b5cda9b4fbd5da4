import pytest

ACCEPTANCE_RESULTS = []


class AcceptanceRecorder:
    """Collect one pass/fail line per acceptance criterion."""

    def __init__(self, sink):
        self.sink = sink

    def record(self, number, title, passed, detail=""):
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number:>2}: {title} -- {detail}"
        self.sink.append((number, line))
        print(line)
        return passed


@pytest.fixture
def acceptance():
    return AcceptanceRecorder(ACCEPTANCE_RESULTS)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_RESULTS, key=lambda item: item[0]):
        terminalreporter.write_line(line)

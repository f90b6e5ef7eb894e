import pytest

# Lines pushed by the acceptance tests; echoed after the run so the
# per-criterion scorecard is visible even with output capture on.
ACCEPTANCE_SCORECARD = []


@pytest.fixture(scope="session")
def scorecard():
    return ACCEPTANCE_SCORECARD


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_SCORECARD:
        terminalreporter.section("acceptance scorecard")
        for line in ACCEPTANCE_SCORECARD:
            terminalreporter.write_line(line)

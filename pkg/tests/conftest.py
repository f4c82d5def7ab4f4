import pytest

# pass/fail lines from test_acceptance, echoed after the run summary so they
# stay visible without -s
ACCEPTANCE_VERDICTS: list[str] = []


@pytest.fixture()
def live_server():
    from bridge_utils import start_live_server

    session, port, stop = start_live_server()
    yield session, port
    stop()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)

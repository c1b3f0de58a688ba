import pytest


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    log = request.config.__dict__.setdefault("_acceptance_log", [])
    return log


def pytest_terminal_summary(terminalreporter, config):
    log = getattr(config, "_acceptance_log", None)
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(log, key=lambda l: int(l.split()[1])):
        terminalreporter.write_line(line)

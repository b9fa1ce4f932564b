import pytest

from fiberdist.channel import FiberParams

ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def fiber():
    return FiberParams(2000.0, 1.27)


@pytest.fixture
def linear_fiber():
    return FiberParams(2000.0, 0.0)


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(lines):
        terminalreporter.write_line(lines[k])

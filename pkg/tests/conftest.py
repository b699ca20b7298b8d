import pytest

_LINES = pytest.StashKey()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture(scope="session")
def verdict(pytestconfig):
    """Record one ``CRITERION n: PASS|FAIL detail`` line (printed now and in the summary)."""
    lines = pytestconfig.stash[_LINES]

    def record(name, ok, detail=""):
        line = f"CRITERION {name}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

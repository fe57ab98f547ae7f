import pytest

# one line per acceptance criterion, printed at the end of the session
CRITERIA: list[str] = []


def pytest_addoption(parser):
    parser.addoption("--bench", action="store_true", default=False,
                     help="run wall-clock ordering checks")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--bench"):
        return
    skip = pytest.mark.skip(reason="wall-clock check; pass --bench to run")
    for item in items:
        if "bench" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA:
            terminalreporter.write_line(line)

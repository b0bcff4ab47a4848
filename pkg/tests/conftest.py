import pytest

from adaptive_signal.model import preset_junction

MEDIUM_DENSITIES = (100, 96, 105, 120)

_acceptance_results = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(label): exit criterion, reported in the summary")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("acceptance")
    if marker is None or call.when != "call":
        return
    _acceptance_results.append((marker.args[0], call.excinfo is None))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok in sorted(_acceptance_results):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}")


@pytest.fixture
def medium_junction():
    return preset_junction("Medium")


@pytest.fixture
def medium_densities():
    return MEDIUM_DENSITIES

import pytest

_RESULTS = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion under its number."""
    number = request.node.get_closest_marker("criterion").args[0]
    _RESULTS[number] = ["FAIL", request.node.name, ""]

    def note(text):
        _RESULTS[number][2] = text
    yield note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and rep.when == "call":
        entry = _RESULTS.setdefault(marker.args[0], ["FAIL", item.name, ""])
        entry[0] = "PASS" if rep.passed else "FAIL"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, name, note = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {name}" + (f"  [{note}]" if note else ""))

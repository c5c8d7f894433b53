import pytest

_ACCEPTANCE: dict[str, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): exit criterion, reported in the terminal summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    name = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _ACCEPTANCE[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE.items():
        terminalreporter.write_line(f"[{status}] {name}")

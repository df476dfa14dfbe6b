import pytest

_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.failed and rep.when == "setup"):
        _OUTCOMES.setdefault(mark.args[0], []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        runs = _OUTCOMES[n]
        failed = [name for name, ok in runs if not ok]
        status = "PASS" if not failed else "FAIL"
        detail = f"{len(runs) - len(failed)}/{len(runs)} checks"
        if failed:
            detail += "; failing: " + ", ".join(failed)
        terminalreporter.write_line(f"criterion {n}: {status} ({detail})")

import pytest

ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number = marker.args[0]
    failed = report.failed
    if report.when == "call" or failed:
        detail = getattr(item, "criterion_detail", "")
        prev = ACCEPTANCE.get(number)
        ok = not failed and (prev is None or prev[0])
        ACCEPTANCE[number] = (ok, detail or (prev[1] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")

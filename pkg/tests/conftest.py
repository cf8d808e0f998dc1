import pytest

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, text = marker.args
    entry = _criteria.setdefault(number, {"text": text, "ok": True, "tests": 0})
    if report.when == "call":
        entry["tests"] += 1
    if report.failed:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        status = "PASS" if entry["ok"] and entry["tests"] else "FAIL"
        terminalreporter.write_line(
            f"[{status}] criterion {number}: {entry['text']} ({entry['tests']} tests)"
        )

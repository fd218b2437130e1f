import pytest

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n, text = marker.args
    entry = _criteria.setdefault(n, {"text": text, "status": "PASS"})
    if rep.skipped and rep.when in ("setup", "call"):
        if entry["status"] == "PASS":
            entry["status"] = "SKIP"
    elif rep.failed:
        entry["status"] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        terminalreporter.write_line(f"[{e['status']}] criterion {n}: {e['text']}")

import re

import pytest

_RESULTS = {}
_NAME = re.compile(r"test_criterion_(\d+)")


@pytest.fixture
def criterion(request):
    """Record the verdict of one acceptance criterion for the end-of-run summary."""
    num = int(_NAME.search(request.node.name).group(1))

    def record(ok: bool, detail: str, report: str = "") -> bool:
        _RESULTS[num] = (bool(ok), detail, report)
        return ok

    return record


def pytest_runtest_logreport(report):
    m = _NAME.search(report.nodeid)
    if m and report.when == "call" and report.failed:
        num = int(m.group(1))
        if num not in _RESULTS or _RESULTS[num][0]:
            _RESULTS[num] = (False, "raised before a verdict was recorded", "")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        ok, detail, report = _RESULTS[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        for line in report.splitlines():
            terminalreporter.write_line("    " + line)

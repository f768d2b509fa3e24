import re
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_CRITERION = re.compile(r"test_acceptance\.py::test_c(\d+)_")
_outcomes = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if m is None:
        return
    n = int(m.group(1))
    failed = report.failed or (report.when == "call" and report.skipped)
    if report.when == "call" or failed:
        _outcomes[n] = _outcomes.get(n, True) and not failed


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    from test_acceptance import CRITERIA
    terminalreporter.section("acceptance criteria")
    for n, title in sorted(CRITERIA.items()):
        state = {True: "PASS", False: "FAIL", None: "not run"}[_outcomes.get(n)]
        terminalreporter.write_line(f"criterion {n:2d}: {state}  {title}")

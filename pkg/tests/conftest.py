import re
import sys

_OUTCOMES = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)_", report.nodeid)
    if m and (report.when == "call" or report.outcome == "failed"):
        _OUTCOMES.setdefault(int(m.group(1)), report)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines after the run."""
    if not _OUTCOMES:
        return
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", {})
    titles = getattr(mod, "TITLES", {})
    terminalreporter.section("acceptance criteria")
    for k in sorted(_OUTCOMES):
        line = results.get(k)
        if line is None:
            rep = _OUTCOMES[k]
            why = rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else rep.outcome
            line = f"[FAIL] criterion {k:2d}: {titles.get(k, '')} | {why}"
        terminalreporter.write_line(line)

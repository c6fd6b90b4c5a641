import os
import sys
import time

sys.path.insert(0, os.path.dirname(__file__))

SUITE_BUDGET_SECONDS = 300.0
_state = {}


def pytest_sessionstart(session):
    _state["start"] = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    _state["elapsed"] = elapsed = time.perf_counter() - _state["start"]
    if elapsed > SUITE_BUDGET_SECONDS and exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = list(module.LINES) if module is not None else []
    if not lines:
        return
    elapsed = _state.get("elapsed", time.perf_counter() - _state["start"])
    ok = elapsed <= SUITE_BUDGET_SECONDS
    lines.append(f"criterion 8 [{'PASS' if ok else 'FAIL'}] suite wall time: "
                 f"{elapsed:.1f}s (< {SUITE_BUDGET_SECONDS:.0f}s)")
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)

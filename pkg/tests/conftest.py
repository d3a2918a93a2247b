"""Acceptance reporting: one PASS/FAIL line per numbered criterion."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

CRITERIA = {
    1: "closed-form line constants and identity",
    2: "soliton energy law",
    3: "scaling invariance",
    4: "solver vs line oracle",
    5: "line state with vertex term",
    6: "star graph regimes and thresholds",
    7: "competitor certificates",
    8: "rearrangement suite",
    9: "metric dependence on fig6",
}

_outcomes: dict[int, list[tuple[str, bool]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    rep = (yield).get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(mark.args[0], []).append((item.name, rep.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        runs = _outcomes.get(n)
        if not runs:
            tr.write_line(f"criterion {n}: NOT RUN  {title}")
            continue
        bad = [name for name, ok in runs if not ok]
        status = "PASS" if not bad else "FAIL"
        extra = f"  failing: {', '.join(bad)}" if bad else ""
        tr.write_line(f"criterion {n}: {status}  {title} ({len(runs)} checks){extra}")

"""Shared test plumbing: the acceptance-criterion registry and summary hook.

Acceptance tests (tests/test_acceptance.py) record one outcome per criterion
through the ``record_criterion`` fixture; after the run a dedicated terminal
section prints one PASS/FAIL line per criterion so the gate is readable
without digging through pytest output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import pytest


@dataclass
class CriterionOutcome:
    label: str
    passed: bool
    detail: str


_LABELS = {
    1: "demand oracle equals exhaustive enumeration",
    2: "reserve matching covers optimal-bundle favorites",
    3: "moving-knife thresholds and exact pool partition",
    4: "capped-welfare floor, turn budget, per-turn gain, cap slack",
    5: "random-halving concentration frequency",
    6: "solver NSW at least half the reference-rematch NSW",
    7: "end-to-end NSW vs brute-force optimum on every seed",
    8: "equicovering gadget separates the promise cases",
    9: "byte-identical reports under a fixed seed",
    10: "canonical serialization round-trips losslessly",
}

_RESULTS: Dict[int, CriterionOutcome] = {}


@pytest.fixture
def record_criterion():
    """Record (criterion number, pass/fail, one-line detail) for the summary."""

    def _record(number: int, passed: bool, detail: str) -> None:
        _RESULTS[number] = CriterionOutcome(_LABELS[number], bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.ensure_newline()
    tr.section("acceptance criteria")
    for number in sorted(_LABELS):
        out = _RESULTS.get(number)
        if out is None:
            tr.write_line(f"criterion {number:2d} [{_LABELS[number]}]: NOT RUN")
            continue
        status = "PASS" if out.passed else "FAIL"
        tr.write_line(f"criterion {number:2d} [{out.label}]: {status} ({out.detail})")

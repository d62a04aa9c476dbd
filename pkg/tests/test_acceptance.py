"""Acceptance gate: every criterion at its stated tolerance and time budget.

Each test prints one ``[PASS]``/``[FAIL]`` line, visible even without ``-s``.
"""
import json
from dataclasses import replace

import pytest

from leapfrog.analytic import CONSTANTS
from leapfrog.verify import CHECKS, run_criterion


def _report(capsys, result):
    with capsys.disabled():
        print(f"\n{result.line()}")
        print("      measured: " + json.dumps(result.as_dict()["measured"], default=str)[:400])
        if result.note:
            print(f"      note: {result.note}")


@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    result = run_criterion(number)
    _report(capsys, result)
    assert result.passed, result.note or result.as_dict()["measured"]
    assert result.within_budget, f"took {result.runtime:.1f}s, budget {result.budget:g}s"


def test_gate_catches_corrupted_constant():
    bad = replace(CONSTANTS, b=1.56)
    result = run_criterion(2, constants=bad)
    assert not result.passed

"""End-to-end acceptance criteria 1-12 at their stated tolerances.

Each test prints one PASS/FAIL line and asserts the per-criterion time budget.
"""
import json

import pytest

from vds.acceptance import CRITERIA, DEFAULT_PARAMS, run_criterion

TIME_BUDGET = 60.0


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = run_criterion(number, DEFAULT_PARAMS, n_nodes=200, seed=0)
    with capsys.disabled():
        print(f"\n{res.line()}")
    assert res.passed, json.dumps(res.details, default=str)[:2000]
    assert res.seconds <= TIME_BUDGET

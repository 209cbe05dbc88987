"""The ten acceptance criteria at their stated tolerances and budgets.

Each test runs one named claim from ``ppm_lab.verify`` at full scale and
records a PASS/FAIL line, shown in the pytest terminal summary.
"""

import json

import pytest

from ppm_lab.verify import CLAIMS

CRITERIA = [
    (1, "offline-exp"),
    (2, "mdp-recursion"),
    (3, "static-closed-form"),
    (4, "allocation-audit"),
    (5, "quantile-lemmas"),
    (6, "oracle-equivalence"),
    (7, "ratio-trends"),
    (8, "welfare-domination"),
    (9, "subadditive"),
    (10, "fixed-point"),
]


@pytest.mark.acceptance
@pytest.mark.parametrize("number, claim", CRITERIA, ids=[c for _, c in CRITERIA])
def test_acceptance_criterion(number, claim, acceptance_log):
    result = CLAIMS[claim](scale=1.0)
    line = f"criterion {number:2d}: {result.line()}"
    print(line)
    acceptance_log.append(line)
    assert result.passed, json.dumps(result.details, default=str, indent=1)

"""Executable acceptance gates; each prints one PASS/FAIL line in the terminal summary."""
import json

import pytest

from subrad import acceptance


@pytest.mark.parametrize("key", list(acceptance.CRITERIA))
def test_criterion(key, acceptance_log):
    res = acceptance.CRITERIA[key]()
    acceptance_log.append(res.line())
    print(res.line())
    print(json.dumps(res.metrics, indent=1, default=float))
    failed = {k: v for k, v in res.checks.items() if not v}
    assert res.passed, f"{key} failed checks {sorted(failed)}; metrics {res.metrics}"

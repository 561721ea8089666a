"""Acceptance criteria 1-11 at their stated tolerances and full grids.

Each test prints one ``[PASS]`` or ``[FAIL]`` line; the lines are also
repeated in the terminal summary (see ``conftest.py``).
"""

import pytest

from revspec.verify import CRITERIA, run_check


@pytest.fixture(scope="module")
def ctx():
    # criteria 10 and 11 share one spectral table
    return {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, ctx, record_property):
    r = run_check(number, quick=False, seed=0, ctx=ctx)
    line = r.line()
    print(line)
    record_property("acceptance", (number, line))
    assert r.passed, f"{line}\n{r.details}"

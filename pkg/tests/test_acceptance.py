"""Full acceptance suite at the stated sizes and tolerances; one line per criterion."""

import os

import pytest

from coflow.acceptance import FULL, QUICK, TITLES, run_acceptance

MASTER_SEED = 20240611
# COFLOW_ACCEPTANCE=quick runs the reduced sizes (not the acceptance tolerances)
SIZES = QUICK if os.environ.get("COFLOW_ACCEPTANCE") == "quick" else FULL


@pytest.fixture(scope="module")
def results():
    print(f"\nacceptance suite, seed {MASTER_SEED}, sizes {'quick' if SIZES is QUICK else 'full'}", flush=True)
    res = run_acceptance(MASTER_SEED, range(1, 13), SIZES, echo=lambda line: print(line, flush=True))
    print("summary: " + ", ".join(f"{c}:{'PASS' if r.ok else 'FAIL'}" for c, r in sorted(res.items())), flush=True)
    return res


@pytest.mark.parametrize("cid", sorted(TITLES), ids=[f"{c:02d}_{TITLES[c].replace(' ', '_')}" for c in sorted(TITLES)])
def test_criterion(results, cid):
    r = results[cid]
    assert r.passed, r.line()
    assert r.runtime_ok, r.line()

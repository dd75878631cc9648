import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coflow.step_fn import (
    MonotoneStepFn,
    canonical,
    compose,
    evaluate,
    has_tie,
    left_limit,
    right_limit,
    v_minus,
    v_plus,
)

small_ints = st.integers(-6, 6)


@st.composite
def step_fns(draw, max_pieces=6):
    """Integer-valued step functions with breakpoints on a half-integer grid."""
    k = draw(st.integers(0, max_pieces))
    bp = sorted(draw(st.sets(st.integers(-12, 12), min_size=k, max_size=k)))
    vals = sorted(draw(st.lists(small_ints, min_size=k + 1, max_size=k + 1)))
    return canonical(np.array(bp) / 2.0, np.array(vals, dtype=float))


PROBE = np.arange(-8.0, 8.01, 0.25)


def test_rejects_invalid_pieces():
    with pytest.raises(ValueError):
        MonotoneStepFn(np.array([1.0, 0.0]), np.array([0.0, 1.0, 2.0]))
    with pytest.raises(ValueError):
        MonotoneStepFn(np.array([0.0]), np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        MonotoneStepFn(np.array([0.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        MonotoneStepFn(np.array([math.nan]), np.array([0.0, 1.0]))


def test_right_continuity_at_breakpoints():
    f = MonotoneStepFn(np.array([0.0, 1.0]), np.array([-1.0, 0.0, 2.0]))
    assert evaluate(f, 0.0) == 0.0
    assert left_limit(f, 0.0) == -1.0
    assert right_limit(f, 1.0) == 2.0
    assert evaluate(f, 0.5) == 0.0


@given(step_fns(), step_fns())
def test_compose_matches_pointwise(f, g):
    h = compose(g, f)
    assert np.array_equal(evaluate(h, PROBE), evaluate(g, evaluate(f, PROBE)))
    assert h.is_canonical()


@given(step_fns(), step_fns(), step_fns())
def test_compose_is_associative(f, g, h):
    assert compose(h, compose(g, f)) == compose(compose(h, g), f)


@given(step_fns(), st.integers(-14, 14))
def test_generalized_inverses_by_brute_force(f, y2):
    y = y2 / 2.0
    fine = np.arange(-10.0, 10.0, 0.5)  # contains every breakpoint
    above = fine[evaluate(f, fine) > y]
    at_least = fine[evaluate(f, fine) >= y]
    vp, vm = v_plus(f, y), v_minus(f, y)
    if above.size == 0:
        assert vp == math.inf
    elif evaluate(f, -1e9) > y:
        assert vp == -math.inf
    else:
        assert vp == above.min()
    if at_least.size == 0:
        assert vm == math.inf
    elif evaluate(f, -1e9) >= y:
        assert vm == -math.inf
    else:
        assert vm == at_least.min()
    assert vm <= vp
    assert has_tie(f, y) == (vm < vp)


@given(step_fns(), st.integers(-14, 14))
def test_inverse_sign_condition(f, y2):
    # any value between the two inverses satisfies (f(x) - y)(x - v) >= 0
    y = y2 / 2.0
    vp, vm = v_plus(f, y), v_minus(f, y)
    for v in {vp, vm}:
        if math.isfinite(v):
            assert np.all((evaluate(f, PROBE) - y) * (PROBE - v) >= 0)


@given(step_fns())
def test_json_round_trip(f):
    assert MonotoneStepFn.from_json(f.to_json()) == f


def test_canonical_merges_equal_pieces():
    f = canonical([0.0, 1.0, 2.0], [0.0, 0.0, 1.0, 1.0])
    assert np.array_equal(f.bp, [1.0])
    assert np.array_equal(f.vals, [0.0, 1.0])


def test_arrays_are_read_only():
    f = canonical([0.0], [0.0, 1.0])
    with pytest.raises(ValueError):
        f.bp[0] = 3.0

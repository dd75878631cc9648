import math

import numpy as np
import pytest

from coflow.drift import PRESETS
from coflow.dual import (
    BackwardFlowRealization,
    BoundaryError,
    UndecidableTie,
    batch_dual,
    check_backward_evolution,
    check_cocycles,
    check_duality,
    check_shift_equivariance,
    dual_from_maps,
    is_left_regular,
    select,
)
from coflow.flow_lattice import LatticeSpec, batch_walk, lattice_walk_flow, simulate_flow
from coflow.step_fn import MonotoneStepFn, v_minus, v_plus


def test_select_rule():
    assert select(1.0, 0.0, True) == 1.0
    assert select(1.0, 0.0, False) == 0.0
    assert select(1.0, 0.0, True, "swapped") == 0.0
    with pytest.raises(ValueError):
        select(1.0, 0.0, True, "other")


def test_dual_from_maps_uses_next_step_only_on_ties():
    f = MonotoneStepFn(np.array([0.0, 1.0]), np.array([-1.0, 0.5, 2.0]))
    assert dual_from_maps(f, None, 0.0) == 0.0  # no tie: both inverses agree
    regular_next = MonotoneStepFn(np.array([3.0]), np.array([0.0, 1.0]))  # continuous at 0.5
    broken_next = MonotoneStepFn(np.array([0.5]), np.array([0.0, 1.0]))  # jumps at 0.5
    assert dual_from_maps(f, regular_next, 0.5) == v_plus(f, 0.5) == 1.0
    assert dual_from_maps(f, broken_next, 0.5) == v_minus(f, 0.5) == 0.0
    with pytest.raises(ValueError):
        dual_from_maps(f, None, 0.5)


def test_sandwich_and_duality(small_flow):
    dual = BackwardFlowRealization(small_flow)
    rep = check_duality(small_flow, dual, 400, seed=2)
    assert rep.violations == 0 and rep.checked == 400
    n = small_flow.n_steps
    for y in np.linspace(-0.5, 0.5, 9):
        try:
            lo, v, hi = dual.sandwich(n - 5, 0, float(y))
        except BoundaryError:
            continue
        assert lo <= v <= hi


def test_backward_evolution(small_flow):
    dual = BackwardFlowRealization(small_flow)
    rep = check_backward_evolution(dual, 200, seed=3)
    assert rep.violations - rep.tie_violations == 0
    assert rep.ties_seen == 0


def test_equivariance_and_cocycles(small_flow):
    assert check_shift_equivariance(small_flow, 0.05, 20, seed=4).violations == 0
    assert check_cocycles(small_flow, 10, seed=5).violations == 0


def test_regularity_tag(small_flow):
    tag = is_left_regular(small_flow, small_flow.spec.time(3), 0.013)
    assert tag.regular  # off the range, every later map is continuous there


def test_tie_at_window_end_is_undecidable():
    flow = lattice_walk_flow(4, 6, seed=1)
    dual = BackwardFlowRealization(flow)
    f = flow.map_between(0, 4)
    y = float(f.vals[f.vals.size // 2])
    with pytest.raises(UndecidableTie):
        dual.at(4, 0, y)


def test_swapped_rule_breaks_backward_evolution():
    # negative control: integer ties make the rule matter; the regular rule is the consistent one
    bad = {}
    for rule in ("regular", "swapped"):
        total = 0
        for rep_id in range(10):
            flow = lattice_walk_flow(12, 10, seed=7, replica=rep_id)
            dual = BackwardFlowRealization(flow, rule=rule)
            total += check_backward_evolution(dual, 200, seed=rep_id, from_range=1.0).violations
        bad[rule] = total
    assert bad["regular"] == 0
    assert bad["swapped"] > 0


def test_batch_dual_matches_single_evaluation():
    spec = LatticeSpec(0, 10, 0.02, -1, 1, 0.2, margin=0.4)
    res = batch_walk(spec, PRESETS["constant"], 4, 0, 50, [10], with_maps=True)
    ys = spec.edges()[3:-3:2]
    got = batch_dual(spec.edges(), res[10], None, ys)
    from coflow.flow_lattice import flow_from_batch

    for row in (0, 17, 49):
        flow = flow_from_batch(spec, PRESETS["constant"], 4, 0, 50, row)
        f = flow.map_between(0, 10)
        for q, y in enumerate(ys):
            assert got[row, q] == dual_from_maps(f, None, float(y))


def test_batch_dual_refuses_unresolved_ties():
    edges = np.array([0.5])
    positions = np.array([[0.0, 1.0]])
    with pytest.raises(UndecidableTie):
        batch_dual(edges, positions, None, [1.0])


def test_query_outside_window_is_reported(small_spec):
    flow = simulate_flow(small_spec, PRESETS["zero"], 0)
    dual = BackwardFlowRealization(flow)
    with pytest.raises(BoundaryError):
        dual.at(flow.n_steps, 0, 100.0)

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import erf

from coflow.drift import PRESETS, DriftSpec
from coflow.flow_lattice import (
    FlowRealization,
    LatticeSpec,
    batch_walk,
    check_axioms,
    evaluate_flow,
    flow_from_batch,
    lattice_walk_flow,
    range_set,
    shift,
    simulate_flow,
)
from coflow.step_fn import evaluate


def test_spec_validation():
    with pytest.raises(ValueError):
        LatticeSpec(0, 10, 0.0, -1, 1, 0.1)
    with pytest.raises(ValueError):
        LatticeSpec(0, 10, 0.01, 1, -1, 0.1)
    with pytest.raises(ValueError):
        LatticeSpec(0, 10, 0.01, -1, 1, 0.3)  # window not a whole number of cells
    LatticeSpec(0, 10, 0.01, -1, 1, 0.1).check_walk()  # 4 dt / dx^2 = 4
    with pytest.raises(ValueError):
        LatticeSpec(0, 10, 0.0125, -1, 1, 0.1).check_walk()  # odd sub-step count
    with pytest.raises(ValueError):
        LatticeSpec(0, 10, 0.001, -1, 1, 0.1).check_walk()  # fewer than two sub-steps


def test_grid_and_edges_interlace(small_spec):
    g, e = small_spec.grid(), small_spec.edges()
    assert g.size == e.size + 1
    assert np.all(g[:-1] < e) and np.all(e < g[1:])
    assert np.isclose(g[small_spec.core_slice()][0], small_spec.x_min)
    assert np.isclose(g[small_spec.core_slice()][-1], small_spec.x_max)


def test_step_images_are_grid_points(small_flow, small_spec):
    grid = small_spec.grid()
    for f in small_flow.step_maps:
        assert np.all(np.isin(f.vals, grid))
        assert np.all(np.isin(f.bp, small_spec.edges()))


def test_same_seed_same_flow(small_spec):
    a = simulate_flow(small_spec, PRESETS["sine"], 5, replica=3)
    b = simulate_flow(small_spec, PRESETS["sine"], 5, replica=3)
    c = simulate_flow(small_spec, PRESETS["sine"], 5, replica=4)
    assert a.dumps() == b.dumps()
    assert a.dumps() != c.dumps()


def test_dump_round_trip(small_flow):
    back = FlowRealization.loads(small_flow.dumps())
    assert back.dumps() == small_flow.dumps()
    n = small_flow.n_steps
    assert back.map_between(0, n) == small_flow.map_between(0, n)


def test_axioms_hold(small_flow):
    rep = check_axioms(small_flow, n_triples=60, seed=1)
    assert rep.c1_violations == 0 and rep.c1_checked > 0
    assert rep.c4_violations == 0 and rep.c5_violations == 0
    assert rep.monotonicity_violations == 0


def test_composition_matches_stepwise_application(small_flow, gen):
    xs = np.sort(gen.uniform(-1, 1, 50))
    n = small_flow.n_steps
    assert np.array_equal(evaluate(small_flow.map_between(0, n), xs), small_flow.apply(0, n, xs))


def test_batch_rows_rebuild_as_flows():
    spec = LatticeSpec(0, 10, 0.02, -1, 1, 0.2, margin=0.4)
    res = batch_walk(spec, PRESETS["sine"], 3, 0, 5, [10])
    for row in range(5):
        flow = flow_from_batch(spec, PRESETS["sine"], 3, 0, 5, row)
        assert np.array_equal(flow.apply(0, 10, spec.grid()), res[10][row])


def test_shift_relabel_group_law(small_flow):
    dt = small_flow.spec.dt
    a = shift(shift(small_flow, 3 * dt), 4 * dt)
    b = shift(small_flow, 7 * dt)
    assert math.isclose(a.spec.t0, b.spec.t0)
    x = np.linspace(-1, 1, 11)
    assert np.array_equal(evaluate_flow(a, a.spec.t0, a.spec.t0 + 0.2, x), evaluate_flow(b, b.spec.t0, b.spec.t0 + 0.2, x))


def test_extended_shift_reuses_streams(small_spec):
    flow = simulate_flow(small_spec, PRESETS["zero"], 2)
    moved = shift(flow, 10 * small_spec.dt, extend=True)
    # overlap: moved step k is original step k + 10
    for k in range(small_spec.n_steps - 10):
        assert moved.step_maps[k] == flow.step_maps[k + 10]


def test_rejects_off_lattice_shift(small_flow):
    with pytest.raises(ValueError):
        shift(small_flow, 0.5 * small_flow.spec.dt)


def test_one_point_law_is_brownian():
    # grid point 0 after t = 1: mean 0, variance 1
    spec = LatticeSpec(0, 50, 0.02, -4, 4, 0.2, margin=2)
    res = batch_walk(spec, DriftSpec.zero(), 9, 0, 4000, [50])
    j = int(np.argmin(np.abs(spec.grid())))
    v = res[50][:, j]
    assert abs(v.mean()) < 4 * 1 / math.sqrt(v.size)
    assert abs(v.var() - 1.0) < 0.08


def test_two_point_coalescence_frequency():
    # two Brownian particles at distance d meet before t with probability 1 - erf(d / (2 sqrt t))
    spec = LatticeSpec(0, 50, 0.02, -4, 4, 0.2, margin=2)
    res = batch_walk(spec, DriftSpec.zero(), 10, 0, 4000, [50])
    grid = spec.grid()
    i, j = int(np.argmin(np.abs(grid))), int(np.argmin(np.abs(grid - 1.0)))
    p = np.mean(res[50][:, i] == res[50][:, j])
    exact = 1 - erf(1.0 / 2.0)
    assert abs(p - exact) < 4 * math.sqrt(exact * (1 - exact) / 4000)


def test_range_set_is_union_of_images(small_flow):
    s = 5
    R = range_set(small_flow, s)
    for r in range(s):
        assert np.all(np.isin(small_flow.map_between(r, s).vals, R))


def test_lattice_walk_fixture_has_integer_ties():
    flow = lattice_walk_flow(6, 5, seed=0)
    f = flow.step_maps[0]
    assert np.all(f.vals == np.round(f.vals))
    assert np.all(f.bp == np.round(f.bp))


@given(st.integers(0, 2**32 - 1))
def test_step_maps_are_monotone_for_any_seed(seed):
    spec = LatticeSpec(0, 3, 0.02, -1, 1, 0.2, margin=0.4)
    flow = simulate_flow(spec, PRESETS["linear"], seed)
    for f in flow.step_maps:
        assert np.all(np.diff(f.vals) >= 0)

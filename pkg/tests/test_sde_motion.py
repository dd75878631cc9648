import math

import numpy as np
import pytest
from scipy.special import erf, ndtr

from coflow import sde_motion as sm
from coflow.drift import PRESETS, DriftSpec


def test_paths_stay_ordered_and_merged_paths_stay_equal():
    s = sm.simulate_npoint((-0.3, 0.0, 0.2), PRESETS["sine"], 1e-2, 1.0, 1, N=300, keep_path=True)
    p = s.paths
    assert np.all(np.diff(p, axis=2) >= 0)
    for i in range(2):
        merged = p[:, :, i] == p[:, :, i + 1]
        # once equal, equal at every later step
        later = np.maximum.accumulate(merged, axis=1)
        assert np.array_equal(merged, later)


def test_precoalesced_start_never_separates():
    s = sm.simulate_npoint((0.5, 0.5), PRESETS["constant"], 1e-2, 1.0, 2, N=500)
    assert np.array_equal(s.final[:, 0], s.final[:, 1])


def test_coalescence_probability_matches_brownian_formula():
    N = 20_000
    s = sm.simulate_npoint((0.0, 0.5), DriftSpec.zero(), 2e-3, 1.0, 3, N=N)
    p = np.mean(s.final[:, 0] == s.final[:, 1])
    exact = sm.gaussian_coalescence_probability(0.5, 1.0)
    assert abs(p - exact) <= 4 * math.sqrt(exact * (1 - exact) / N)


def test_one_point_law_with_linear_drift():
    s = sm.simulate_npoint((1.0,), PRESETS["linear"], 1e-2, 1.0, 4, N=20_000)
    x = s.final[:, 0]
    assert x.mean() == pytest.approx(math.exp(-1.0), abs=0.02)
    assert x.var() == pytest.approx((1 - math.exp(-2.0)) / 2, rel=0.05)


def test_same_noise_same_replicas_across_thread_counts():
    a = sm.simulate_npoint((0.0, 0.3), PRESETS["sine"], 1e-2, 0.5, 5, N=2500, threads=1)
    b = sm.simulate_npoint((0.0, 0.3), PRESETS["sine"], 1e-2, 0.5, 5, N=2500, threads=4)
    assert np.array_equal(a.final, b.final)


def test_custom_drift_is_rejected():
    custom = DriftSpec("custom", (), fn=np.tanh, lipschitz_L=1.0)
    with pytest.raises(ValueError):
        sm.simulate_npoint((0.0,), custom, 1e-2, 1.0, 0)


def test_input_validation():
    with pytest.raises(ValueError):
        sm.simulate_npoint((1.0, 0.0), DriftSpec.zero(), 1e-2, 1.0, 0)
    with pytest.raises(ValueError):
        sm.simulate_npoint((0.0,), DriftSpec.zero(), 0.3, 1.0, 0)
    with pytest.raises(ValueError):
        sm.Interval(1.0, 0.0)
    with pytest.raises(ValueError):
        sm.estimate_transition(1, (0.0,), DriftSpec.zero(), 1.0, [(-1, 1)], N=10, seed=0)


def test_transition_estimate_matches_normal_cdf():
    est = sm.estimate_transition(1, (0.0,), DriftSpec.zero(), 1.0, [(-math.inf, 0.5)], N=20_000, seed=6, dt=1e-2)
    assert abs(est.p_hat - ndtr(0.5)) <= 4 * est.se


def test_stopped_equivalence_shared_noise_is_bitwise():
    r = sm.check_stopped_equivalence((-0.2, 0.0, 0.3), PRESETS["linear"], 1.0, 10_000, 7, dt=1e-2)
    assert r["shared_noise_bitwise"]
    assert len(r["ks"]) == 3


def test_killed_kernel_whole_line_limit():
    x, y = np.array(0.1), np.array(0.4)
    free = sm.killed_kernel(1.0, x, y, -math.inf, math.inf)
    boxed = sm.killed_kernel(1.0, x, y, -50.0, 50.0)
    assert boxed == pytest.approx(free, rel=1e-12)


def test_killed_kernel_mass_is_exit_free_probability():
    # P(BM from 0 stays in (-1, 1) up to t = 1) by quadrature of the kernel, against the series
    ys = np.linspace(-1, 1, 4001)
    mass = np.trapezoid(sm.killed_kernel(1.0, np.array(0.0), ys, -1.0, 1.0), ys)
    series = sum((4 / math.pi) * ((-1) ** k / (2 * k + 1)) * math.exp(-((2 * k + 1) ** 2) * math.pi**2 / 8) for k in range(20))
    assert mass == pytest.approx(series, abs=1e-6)


def test_ordered_survival_two_routes_and_exact_value():
    d = 0.5
    exact = erf(d / 2.0)
    det = sm.estimate_ordered_survival(2, (-d / 2, d / 2), -10, 10, DriftSpec.zero(), 1.0, 50_000, 8)
    paths = sm.estimate_ordered_survival(2, (-d / 2, d / 2), -10, 10, DriftSpec.zero(), 1.0, 20_000, 9, method="paths", dt=2e-3)
    assert abs(det.p_hat - exact) <= 4 * det.se
    assert abs(paths.p_hat - exact) <= 4 * paths.se


def test_determinant_route_needs_zero_drift():
    with pytest.raises(ValueError):
        sm.estimate_ordered_survival(2, (0.0, 1.0), -5, 5, PRESETS["constant"], 1.0, 1000, 0)


def test_interlaced_closed_form_reduces_to_one_point():
    for name in ("zero", "constant", "linear"):
        a = sm.interlaced_closed_form(PRESETS[name], [0.2], [0.7], 0.5)
        b = sm.closed_form_one_point(PRESETS[name], 0.2, 0.7, 0.5)
        assert a == pytest.approx(b, abs=1e-14)
    assert sm.interlaced_closed_form(PRESETS["sine"], [0.0], [0.1], 1.0) is None


def test_dual_relation_small_sample():
    lat = sm.DualLattice(x_min=-6.0, x_max=6.0)
    est = sm.estimate_dual_relation(2, [-0.4, 0.2], [0.1, 1.1], PRESETS["zero"], 0.5, 10_000, 10, dt=5e-3, lattice=lat)
    assert est.pathwise_mismatches == 0
    assert est.gap <= 4 * est.combined_se
    assert abs(est.dual.p_hat - est.closed_form) <= 4 * est.dual.se


def test_snapping_targets():
    lat = sm.DualLattice()
    assert lat.snap_grid(0.07) == pytest.approx(0.0)
    assert lat.snap_edge(0.07) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        sm.lattice_dual_samples(PRESETS["zero"], [0.0], [0.5], 1000, 0)  # 0 is a grid point


def test_tail_lemma_zero_drift():
    r = sm.check_tail_lemma(DriftSpec.zero(), 1.0, 0.0, [0.0, 2.5, 5.0], 10_000, 11, dt=1e-2)
    first = r["rows"][0]
    assert abs(first["p_hat"] - 0.5) <= 3 * first["se"]
    assert r["ok"]


def test_tp_checks_zero_drift():
    res = sm.tp_checks(DriftSpec.zero(), N=5000, seed=12, dt=5e-3)
    assert res["diagonal"]["ok"] and res["singleton"]["ok"] and res["small_time"]["ok"]
    assert res["compatibility"]["ok"]

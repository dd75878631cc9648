import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from coflow import bounds
from coflow.drift import DriftSpec


def _g_by_quadrature(x: float) -> float:
    # independent route: integrate the normal density directly
    tail, _ = integrate.quad(lambda z: math.exp(-z * z / 2) / math.sqrt(2 * math.pi), x, math.inf, epsabs=1e-14)
    return x * x * 2 * tail


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0, 3.0])
def test_g_matches_quadrature(x):
    assert bounds.g(x) == pytest.approx(_g_by_quadrature(x), rel=1e-10)


def test_g_at_two():
    assert bounds.g(2.0) == pytest.approx(0.182001, abs=5e-7)


def test_maximizer():
    assert bounds.X_STAR == pytest.approx(1.19060, abs=5e-5)
    assert abs(bounds.g_prime(bounds.X_STAR)) < 1e-9
    assert bounds.G_MAX == pytest.approx(0.331433, abs=5e-6)
    assert bounds.g(bounds.X_STAR - 0.01) < bounds.G_MAX > bounds.g(bounds.X_STAR + 0.01)


def test_g_rejects_negative():
    with pytest.raises(ValueError):
        bounds.g(-1.0)


@given(st.floats(1e-300, 0.33))
def test_g_inv_inverts(eps):
    x = bounds.g_inv(eps)
    assert x >= bounds.X_STAR
    assert bounds.g(x) == pytest.approx(eps, rel=1e-8)


def test_g_inv_domain():
    with pytest.raises(ValueError):
        bounds.g_inv(0.4)
    with pytest.raises(ValueError):
        bounds.g_inv(0.0)


@pytest.mark.parametrize("eps", np.geomspace(1e-12, 1e-8, 5))
def test_g_inv_asymptotics(eps):
    assert abs(bounds.g_inv(eps) / math.sqrt(2 * abs(math.log(eps))) - 1) <= 0.05


def test_tail_identity_grid():
    worst = max(bounds.gaussian_tail_identity_check(e, t) for e in np.geomspace(1e-3, 1, 10) for t in np.geomspace(1e-4, 1, 10))
    assert worst <= 1e-10


def test_w_bound_below_exact_time():
    for eps in (0.5, 0.125, 2**-6):
        for delta in (0.1, 10.0):
            r = bounds.check_w_bound(eps, delta)
            if r["asserted"]:
                assert r["holds"]
                assert r["bound"] <= r["exact_w"]


def test_w_hypotheses_fail_for_large_product():
    bound, rep = bounds.w_lower_bound(4.0, 10.0)
    assert not rep.small_product and math.isnan(bound)


def test_exit_probability_matches_monte_carlo_free_formula():
    # zero drift: P(|W_t| >= eps) = erfc(eps / sqrt(2 t))
    assert bounds.exit_probability(1.0, 1.0) == pytest.approx(math.erfc(1 / math.sqrt(2)), rel=1e-14)


def test_schedule_falls():
    sched = bounds.liminf_schedule(bounds.BoundsProfile(), 20)
    ratios = [r["ratio"] for r in sched["rows"]]
    assert sched["fall_factor"] >= 1e3
    assert sched["decreasing_from"] == 1
    assert all(a > b for a, b in zip(ratios, ratios[1:]))


def test_profile_validation():
    with pytest.raises(ValueError):
        bounds.BoundsProfile(alpha=1.0, beta=0.0)
    with pytest.raises(ValueError):
        bounds.BoundsProfile(p=2.0)
    prof = bounds.BoundsProfile(drift=DriftSpec.linear(0.0, -1.0))
    assert prof.L == 1.0 and prof.M == pytest.approx(1.0)

from fractions import Fraction

import pytest

from coflow.web_oracle import (
    WebConfig,
    WebWindow,
    WindowExit,
    exhaustive_check,
    interlaced_cases,
    sampled_check,
    web_dual,
    web_duality_relation,
    web_forward,
)


@pytest.fixture(scope="module")
def window():
    return WebWindow(3, 0, 5)


def test_exhaustive_small_window(window):
    rep = exhaustive_check(window, embed=True, c1=True)
    assert rep.configs == 2**window.n_arrows
    assert rep.ok
    assert rep.embed_comparisons > 0
    d = rep.to_dict()
    assert d["forward_step_law"] == {"-1": "1/2", "1": "1/2"}
    assert d["dual_step_law"] == {"-1": "1/2", "1": "1/2"}


def test_sampled_check_agrees(window):
    assert sampled_check(window, 40, seed=1).ok


def test_forward_and_dual_walks_never_cross(window):
    for k in range(0, window.n_configs, 7):
        cfg = WebConfig.from_index(window, k)
        fwd = web_forward(cfg, (0, 2), 2)
        dual = web_dual(cfg, (2, 3), 2)  # dual positions at times 2, 1, 0
        # the walkers never coincide and keep one order on their shared times
        signs = {d > f for f, d in zip(fwd, reversed(dual))}
        assert len(signs) == 1


def test_walker_leaving_the_window_raises(window):
    cfg = WebConfig.from_index(window, 0)  # every arrow points left
    with pytest.raises(WindowExit):
        web_forward(cfg, (0, 0), 3)


@pytest.mark.parametrize("t", [1, 2, 3])
def test_one_point_duality_exact(window, t):
    for xs, ys in interlaced_cases(window, t, 1):
        r = web_duality_relation(window, xs, ys, t)
        assert r["equal"] and r["pathwise_equal"]
        assert isinstance(r["forward"], Fraction)


def test_two_point_duality_exact():
    w = WebWindow(2, 0, 9)
    cases = interlaced_cases(w, 2, 2)
    assert cases
    for xs, ys in cases:
        r = web_duality_relation(w, xs, ys, 2)
        assert r["equal"] and r["pathwise_equal"]


def test_interlacing_is_enforced(window):
    with pytest.raises(ValueError):
        web_duality_relation(window, [2], [1], 1)

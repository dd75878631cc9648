"""Tail bounds for the one-point motion and the decay schedule built on them.

Normal tails always go through ``erfc``; naive quadrature loses all relative
precision at the ``1e-15`` arguments the schedule reaches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .drift import DriftSpec

SQRT2 = math.sqrt(2.0)
BISECT_TOL = 1e-12


def g(x):
    """``x^2 P(|N| >= x)`` for a standard normal ``N``."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("g is defined for x >= 0")
    out = x * x * erfc(x / SQRT2)
    return float(out) if out.ndim == 0 else out


def g_prime(x):
    x = np.asarray(x, dtype=np.float64)
    out = 2.0 * x * erfc(x / SQRT2) - x * x * math.sqrt(2.0 / math.pi) * np.exp(-0.5 * x * x)
    return float(out) if out.ndim == 0 else out


def _bisect(fn, lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    f_lo = fn(lo)
    if f_lo * fn(hi) > 0:
        raise ValueError("bracket does not straddle a root")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if f_mid == 0:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_x_star(lo: float = 1.1, hi: float = 1.25) -> float:
    """Maximizer of ``g``: root of ``g'`` in ``[1.1, 1.25]``."""
    return _bisect(g_prime, lo, hi)


X_STAR = find_x_star()
G_MAX = g(X_STAR)


def g_inv(eps: float) -> float:
    """Inverse of ``g`` on its decreasing branch ``[x*, inf)``."""
    if not 0 < eps <= G_MAX:
        raise ValueError(f"g_inv needs 0 < eps <= g(x*) = {G_MAX:.12g}")
    hi = 2 * X_STAR
    while g(hi) > eps:
        hi *= 2
    return _bisect(lambda x: g(x) - eps, X_STAR, hi)


def gaussian_tail_identity_check(eps: float, t: float) -> float:
    """``|2 P(|W_t| >= eps/4) - (32 t / eps^2) g(eps / (4 sqrt t))|``."""
    if eps <= 0 or t <= 0:
        raise ValueError("eps and t must be positive")
    lhs = 2.0 * erfc(eps / (4.0 * math.sqrt(2.0 * t)))
    rhs = 32.0 * t / eps**2 * g(eps / (4.0 * math.sqrt(t)))
    return abs(lhs - rhs)


@dataclass(frozen=True)
class HypothesisReport:
    small_product: bool  # eps^2 delta < 32 g(x*)
    small_eps: bool  # eps < 4 (1 + M) log 2 / L, vacuous for L = 0
    small_bound: bool  # bound < eps / (4 (1 + M))

    @property
    def ok(self) -> bool:
        return self.small_product and self.small_eps and self.small_bound


def w_lower_bound(eps: float, delta: float, L: float = 0.0, M: float = 0.0) -> tuple[float, HypothesisReport]:
    """``(eps / (4 g_inv(eps^2 delta / 32)))^2`` and the report on its three hypotheses.

    The value is ``nan`` when ``eps^2 delta / 32`` lies outside the domain of ``g_inv``.
    """
    if eps <= 0 or delta <= 0 or L < 0 or M < 0:
        raise ValueError("need eps, delta > 0 and L, M >= 0")
    arg = eps * eps * delta / 32.0
    small_product = arg < G_MAX
    small_eps = True if L == 0 else eps < 4.0 * (1.0 + M) * math.log(2.0) / L
    bound = (eps / (4.0 * g_inv(arg))) ** 2 if small_product else math.nan
    small_bound = small_product and bound < eps / (4.0 * (1.0 + M))
    return bound, HypothesisReport(small_product, small_eps, small_bound)


def exit_probability(eps: float, t: float, drift: DriftSpec | None = None):
    """Exact ``P(|X_t - x| >= eps)`` for Brownian motion with zero or constant drift (any ``x``)."""
    c = 0.0
    if drift is not None and drift.kind not in ("zero", "constant"):
        raise ValueError("exact tails are only available for zero or constant drift")
    if drift is not None and drift.kind == "constant":
        c = drift.params[0]
    t = np.asarray(t, dtype=np.float64)
    s = np.sqrt(2.0 * t)
    # P(N(ct, t) >= eps) + P(N(ct, t) <= -eps)
    return 0.5 * erfc((eps - c * t) / s) + 0.5 * erfc((eps + c * t) / s)


def exact_w(eps: float, delta: float, drift: DriftSpec | None = None, t_max: float = 1e3, n_grid: int = 4001) -> float:
    """``inf{t > 0 : P_t(x, (x - eps, x + eps)^c) >= delta t}`` from the exact tail.

    A log grid locates the first sign change and bisection refines it.
    """
    def excess(t):
        return float(exit_probability(eps, t, drift)) - delta * t

    ts = np.geomspace(1e-14, t_max, n_grid)
    vals = exit_probability(eps, ts, drift) - delta * ts
    hit = np.flatnonzero(vals >= 0)
    if hit.size == 0:
        return math.inf
    k = int(hit[0])
    if k == 0:
        return float(ts[0])
    return _bisect(excess, float(ts[k - 1]), float(ts[k]), tol=1e-12 * float(ts[k]))


def check_w_bound(
    eps: float, delta: float, drift: DriftSpec | None = None, alpha: float = -1.0, beta: float = 1.0, n_t: int = 2000
) -> dict:
    """Confirms ``(1/t) P_t(x, (x - eps, x + eps)^c) < delta`` for all grid ``t`` below the lower bound."""
    M = 0.0 if drift is None else drift.sup_bound(alpha, beta)
    L = 0.0 if drift is None else drift.lipschitz_L
    bound, hyp = w_lower_bound(eps, delta, L, M)
    out = {"eps": eps, "delta": delta, "bound": bound, "hypotheses_ok": hyp.ok}
    if not hyp.ok:
        out.update(asserted=False, holds=None, exact_w=None)
        return out
    ts = bound * np.concatenate((np.geomspace(1e-12, 1.0, n_t, endpoint=False), [1 - 1e-12]))
    rates = exit_probability(eps, ts, drift) / ts
    w = exact_w(eps, delta, drift)
    out.update(asserted=True, holds=bool(np.all(rates < delta)) and w >= bound, exact_w=w, max_rate=float(rates.max()))
    return out


@dataclass(frozen=True)
class BoundsProfile:
    """Constants entering the schedule ratio ``f(8 eps_n) / w(eps_n, delta_n)`` with ``f(e) = C e^3``."""

    alpha: float = -1.0
    beta: float = 1.0
    horizon: float = 1.0
    drift: DriftSpec = field(default_factory=DriftSpec.zero)
    p: float = 1.25
    C: float = 1.0

    def __post_init__(self) -> None:
        if not self.alpha < self.beta:
            raise ValueError("need alpha < beta")
        if not 1.0 < self.p < 1.5:
            raise ValueError("p must lie in (1, 3/2)")
        if self.C <= 0 or self.horizon <= 0:
            raise ValueError("C and horizon must be positive")

    @property
    def L(self) -> float:
        return float(self.drift.lipschitz_L)

    @property
    def M(self) -> float:
        return self.drift.sup_bound(self.alpha, self.beta)

    @staticmethod
    def schedule(n: int) -> tuple[float, float]:
        return 2.0**-n, 1.0 / n


def liminf_schedule(profile: BoundsProfile, n_max: int = 20) -> dict:
    """Ratio table for ``eps_n = 2^-n``, ``delta_n = 1/n`` plus the decay summary."""
    rows = []
    for n in range(1, n_max + 1):
        eps, delta = profile.schedule(n)
        w, hyp = w_lower_bound(eps, delta, profile.L, profile.M)
        f8 = profile.C * (8.0 * eps) ** 3
        rows.append(
            {
                "n": n,
                "eps": eps,
                "delta": delta,
                "g_inv": g_inv(eps * eps * delta / 32.0),
                "w_bound": w,
                "ratio": f8 / w,
                # leading-order growth of g_inv^2 substituted into eps * g_inv^2
                "asymptotic": (2 * n * math.log(4) + 2 * math.log(32 * n)) / 2.0**n,
                "hypotheses_ok": hyp.ok,
            }
        )
    ratios = np.array([r["ratio"] for r in rows])
    dec = np.diff(ratios) < 0
    # first n from which the ratio decreases monotonically to n_max
    n0 = n_max
    for k in range(len(dec) - 1, -1, -1):
        if not dec[k]:
            break
        n0 = k + 1
    return {
        "rows": rows,
        "decreasing_from": n0,
        "fall_factor": float(ratios[0] / ratios[-1]),
        "final_below_1e-3_of_first": bool(ratios[-1] < 1e-3 * ratios[0]),
    }

"""Discrete web: coalescing simple random walks and their dual walks.

Forward walkers live on even sites ``(t, z)`` with ``t + z`` even and follow
the arrow at their site to ``(t + 1, z + arrow)``.  Dual walkers live on odd
sites and step from ``(t, y)`` to ``(t - 1, y - arrow(t - 1, y))``: the dual
edge is the only one of the two candidates that does not cross the forward
edge leaving ``(t - 1, y)``.

All probabilities are exact fractions over the ``2^k`` equally likely arrow
configurations of a window.  The web-level checks are vectorized over
configurations; the cross-check against the continuum dual construction runs
``dual_evaluate`` on each embedded configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from . import rng
from .dual import BackwardFlowRealization, BoundaryError
from .flow_lattice import FlowRealization, LatticeSpec
from .step_fn import canonical, compose, v_minus, v_plus

MAX_ENUMERATED = 2**20


class WindowExit(ValueError):
    """A walker left the window."""


@dataclass(frozen=True)
class WebWindow:
    T: int
    z_min: int
    z_max: int

    def __post_init__(self) -> None:
        if self.T < 1 or self.z_max <= self.z_min:
            raise ValueError("need T >= 1 and z_min < z_max")

    @property
    def arrow_sites(self) -> list[tuple[int, int]]:
        return [(t, z) for t in range(self.T) for z in range(self.z_min, self.z_max + 1) if (t + z) % 2 == 0]

    @property
    def n_arrows(self) -> int:
        return len(self.arrow_sites)

    @property
    def n_configs(self) -> int:
        return 2**self.n_arrows

    def column_table(self) -> np.ndarray:
        """``table[t, z - z_min]`` is the arrow column of site ``(t, z)``, or ``-1``."""
        tab = -np.ones((self.T, self.z_max - self.z_min + 1), dtype=np.int64)
        for k, (t, z) in enumerate(self.arrow_sites):
            tab[t, z - self.z_min] = k
        return tab

    def contains(self, z: int) -> bool:
        return self.z_min <= z <= self.z_max

    def to_dict(self) -> dict:
        return {"T": self.T, "z_min": self.z_min, "z_max": self.z_max}


@dataclass(frozen=True)
class WebConfig:
    window: WebWindow
    arrows: tuple[int, ...]  # +1 / -1 per entry of window.arrow_sites

    def __post_init__(self) -> None:
        if len(self.arrows) != self.window.n_arrows or any(a not in (-1, 1) for a in self.arrows):
            raise ValueError("need one arrow in {-1, +1} per even site")

    @classmethod
    def from_index(cls, window: WebWindow, k: int) -> "WebConfig":
        """Bit ``i`` of ``k`` set means the ``i``-th arrow points right."""
        return cls(window, tuple(1 if (k >> i) & 1 else -1 for i in range(window.n_arrows)))

    def arrow(self, t: int, z: int) -> int:
        if (t + z) % 2 or not (0 <= t < self.window.T and self.window.contains(z)):
            raise WindowExit(f"no arrow at ({t}, {z})")
        w = self.window
        # sites are listed row by row; row t holds the sites z with t + z even
        first = w.z_min + (t + w.z_min) % 2
        per_row = [(w.z_max - (w.z_min + (u + w.z_min) % 2)) // 2 + 1 for u in range(t)]
        return self.arrows[sum(per_row) + (z - first) // 2]

    def dual_arrow(self, t: int, y: int) -> int:
        """Direction of the dual step from odd site ``(t, y)``."""
        return -self.arrow(t - 1, y)


def web_forward(config: WebConfig, start: tuple[int, int], k: int) -> list[int]:
    t, z = start
    if (t + z) % 2:
        raise ValueError("forward walkers start on even sites")
    path = [z]
    for u in range(t, t + k):
        z = z + config.arrow(u, z)
        if not config.window.contains(z):
            raise WindowExit(f"forward walker left the window at time {u + 1}")
        path.append(z)
    return path


def web_dual(config: WebConfig, start: tuple[int, int], k: int) -> list[int]:
    """Positions of the dual walker at times ``t, t-1, ..., t-k``."""
    t, y = start
    if (t + y) % 2 == 0:
        raise ValueError("dual walkers start on odd sites")
    if k > t:
        raise WindowExit("dual walker would pass time 0")
    path = [y]
    for u in range(t, t - k, -1):
        y = y + config.dual_arrow(u, y)
        if not config.window.contains(y):
            raise WindowExit(f"dual walker left the window at time {u - 1}")
        path.append(y)
    return path


def web_embed(config: WebConfig) -> FlowRealization:
    """The forward web as step maps with ``dt = 1``.

    At time ``t`` the even sites ``z`` are two apart; site ``z`` owns the cell
    ``[z - 1, z + 1)`` (outermost cells are unbounded) and maps to
    ``z + arrow``.  Breakpoints are therefore odd sites, where dual walkers sit.
    """
    w = config.window
    maps = []
    for t in range(w.T):
        sites = [z for z in range(w.z_min, w.z_max + 1) if (t + z) % 2 == 0]
        vals = [z + config.arrow(t, z) for z in sites]
        maps.append(canonical([z + 1 for z in sites[:-1]], vals))
    spec = LatticeSpec(0.0, w.T, 1.0, float(w.z_min), float(w.z_max), 1.0, margin=0.0)
    return FlowRealization(spec, tuple(maps))


def _bits(window: WebWindow, start: int, stop: int) -> np.ndarray:
    ks = np.arange(start, stop, dtype=np.int64)
    return ((ks[:, None] >> np.arange(window.n_arrows)) & 1).astype(np.int8)


def _forward_paths(window: WebWindow, arrows: np.ndarray, tab: np.ndarray, s: int, x: int) -> np.ndarray:
    """Shape ``(configs, T - s + 1)``; ``nan`` after leaving the window."""
    n = arrows.shape[0]
    rows = np.arange(n)
    pos = np.full(n, float(x))
    out = [pos]
    for t in range(s, window.T):
        ok = ~np.isnan(pos)
        zi = np.where(ok, pos - window.z_min, 0).astype(np.int64)
        step = arrows[rows, tab[t, zi]]
        nxt = np.where(ok, pos + step, np.nan)
        nxt[(nxt < window.z_min) | (nxt > window.z_max)] = np.nan
        pos = nxt
        out.append(pos)
    return np.stack(out, axis=1)


def _dual_paths(window: WebWindow, arrows: np.ndarray, tab: np.ndarray, t: int, y: int) -> np.ndarray:
    """Shape ``(configs, t + 1)``, column ``j`` is the position at time ``t - j``."""
    n = arrows.shape[0]
    rows = np.arange(n)
    pos = np.full(n, float(y))
    out = [pos]
    for u in range(t, 0, -1):
        ok = ~np.isnan(pos)
        zi = np.where(ok, pos - window.z_min, 0).astype(np.int64)
        nxt = np.where(ok, pos - arrows[rows, tab[u - 1, zi]], np.nan)
        nxt[(nxt < window.z_min) | (nxt > window.z_max)] = np.nan
        pos = nxt
        out.append(pos)
    return np.stack(out, axis=1)


@dataclass
class WebReport:
    window: dict
    configs: int = 0
    forward_crossings: int = 0
    dual_crossings: int = 0
    transversal_crossings: int = 0
    pair_checks: int = 0
    evolution_violations: int = 0
    evolution_checks: int = 0
    sandwich_violations: int = 0
    embed_mismatches: int = 0
    embed_comparisons: int = 0
    embed_c1_violations: int = 0
    forward_step_law: dict = field(default_factory=dict)
    dual_step_law: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (
            self.forward_crossings == 0
            and self.dual_crossings == 0
            and self.transversal_crossings == 0
            and self.evolution_violations == 0
            and self.sandwich_violations == 0
            and self.embed_mismatches == 0
            and self.embed_c1_violations == 0
        )

    def merge(self, other: "WebReport") -> "WebReport":
        for k, v in other.__dict__.items():
            if isinstance(v, int) and not isinstance(v, bool):
                setattr(self, k, getattr(self, k) + v)
        for k in ("forward_step_law", "dual_step_law"):
            mine = getattr(self, k)
            for key, c in getattr(other, k).items():
                mine[key] = mine.get(key, 0) + c
        return self

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        n = self.configs
        for k in ("forward_step_law", "dual_step_law"):
            d[k] = {str(key): str(Fraction(c, n)) if n else "0" for key, c in sorted(getattr(self, k).items())}
        d["ok"] = self.ok
        return d


def _crosses(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per row: the paths change strict order where both are defined (``a`` at or below ``b`` first)."""
    both = ~np.isnan(a) & ~np.isnan(b)
    above = both & (a > b)
    below = both & (a < b)
    return np.any(above, axis=1) & np.any(below, axis=1)


def _check_chunk(window: WebWindow, start: int, stop: int, embed: bool, c1: bool = False) -> WebReport:
    rep = WebReport(window.to_dict())
    arrows = 2 * _bits(window, start, stop).astype(np.int64) - 1
    tab = window.column_table()
    n = arrows.shape[0]
    rep.configs = n
    T = window.T
    evens = {s: [z for z in range(window.z_min, window.z_max + 1) if (s + z) % 2 == 0] for s in range(T + 1)}
    odds = {t: [z for z in range(window.z_min, window.z_max + 1) if (t + z) % 2 == 1] for t in range(T + 1)}
    fwd = {(s, x): _forward_paths(window, arrows, tab, s, x) for s in range(T) for x in evens[s]}
    dua = {(t, y): _dual_paths(window, arrows, tab, t, y) for t in range(1, T + 1) for y in odds[t]}

    # one-step laws from a central site
    mid = (window.z_min + window.z_max) // 2
    x0 = mid if mid % 2 == 0 else mid + 1
    for d in (-1, 1):
        rep.forward_step_law[d] = rep.forward_step_law.get(d, 0) + int(np.count_nonzero(fwd[(0, x0)][:, 1] - x0 == d))
    y0 = x0  # (1, x0) is an odd site
    for d in (-1, 1):
        rep.dual_step_law[d] = rep.dual_step_law.get(d, 0) + int(np.count_nonzero(dua[(1, y0)][:, 1] - y0 == d))

    # forward paths from the same time stay weakly ordered; dual paths likewise
    for s in range(T):
        for a, b in zip(evens[s], evens[s][1:]):
            rep.forward_crossings += int(np.count_nonzero(np.any(fwd[(s, a)] > fwd[(s, b)], axis=1)))
    for t in range(1, T + 1):
        for a, b in zip(odds[t], odds[t][1:]):
            rep.dual_crossings += int(np.count_nonzero(np.any(dua[(t, a)] > dua[(t, b)], axis=1)))

    # forward from (s, x) against dual from (t, y) on the shared times [s, t]
    for (s, x), fp in fwd.items():
        for (t, y), dp in dua.items():
            if t <= s:
                continue
            f_part = fp[:, : t - s + 1]
            d_part = dp[:, : t - s + 1][:, ::-1]  # dual positions at times s..t
            rep.transversal_crossings += int(np.count_nonzero(_crosses(f_part, d_part)))
            rep.pair_checks += n

    # backward evolution of the dual walk: restarting at an intermediate time changes nothing
    for (t, y), dp in dua.items():
        for j in range(1, t):
            s = t - j
            for z in odds[s]:
                hit = dp[:, j] == z
                if np.any(hit):
                    rest = dua[(s, z)][hit]
                    rep.evolution_violations += int(np.count_nonzero(np.any(
                        (rest != dp[hit][:, j:]) & ~np.isnan(dp[hit][:, j:]), axis=1)))
                    rep.evolution_checks += int(np.count_nonzero(hit))

    if embed:
        for k in range(start, stop):
            _embed_checks(WebConfig.from_index(window, k), rep, c1)
    return rep


def supported(window: WebWindow, y: int) -> bool:
    """A dual step from ``y`` uses only breakpoints inside the embedded window."""
    return window.z_min <= y - 2 and y + 2 <= window.z_max


def embedded_c1_violations(flow: FlowRealization) -> int:
    """Exact composition identity ``psi_{r,t} = psi_{s,t} o psi_{r,s}`` for every lattice triple."""
    n = flow.n_steps
    bad = 0
    for r in range(n + 1):
        for s in range(r + 1, n + 1):
            for t in range(s + 1, n + 1):
                if compose(flow.map_between(s, t), flow.map_between(r, s)) != flow.map_between(r, t):
                    bad += 1
    return bad


def _embed_checks(config: WebConfig, rep: WebReport, c1: bool) -> None:
    w = config.window
    flow = web_embed(config)
    dual = BackwardFlowRealization(flow)
    if c1:
        rep.embed_c1_violations += embedded_c1_violations(flow)
    for t in range(1, w.T + 1):
        for y in range(w.z_min, w.z_max + 1):
            if (t + y) % 2 == 0:
                continue
            # walk back while every step stays supported
            pos, path = y, [y]
            for u in range(t, 0, -1):
                if not supported(w, pos):
                    break
                pos = pos + config.dual_arrow(u, pos)
                path.append(pos)
            for j in range(1, len(path)):
                s = t - j
                try:
                    value = dual.at(t, s, float(y))
                except BoundaryError:
                    rep.embed_mismatches += 1
                    continue
                rep.embed_comparisons += 1
                rep.embed_mismatches += int(value != path[j])
                f = flow.map_between(s, t)
                rep.sandwich_violations += int(not v_minus(f, y) <= path[j] <= v_plus(f, y))


def exhaustive_check(
    window: WebWindow, embed: bool = True, c1: bool = False, threads: int | None = None, chunk: int = 4096
) -> WebReport:
    """Every property over all ``2^k`` configurations of ``window``.

    ``c1`` adds the exhaustive composition check on each embedded flow.
    """
    total = window.n_configs
    if total > MAX_ENUMERATED:
        raise ValueError(f"{total} configurations exceed the enumeration cap {MAX_ENUMERATED}")
    parts = [(s, min(s + chunk, total)) for s in range(0, total, chunk)]
    reps = rng.map_blocks(lambda p: _check_chunk(window, p[0], p[1], embed, c1), parts, threads)
    out = WebReport(window.to_dict())
    for r in reps:
        out.merge(r)
    return out


def sampled_check(window: WebWindow, n_configs: int, seed: int = 0, embed: bool = True, c1: bool = False) -> WebReport:
    """Uniformly sampled configurations for windows too large to enumerate (exact per-config checks)."""
    if window.n_arrows > 62:
        raise ValueError("sampling supports at most 62 arrow sites")
    g = rng.stream(seed, rng.MISC, 20)
    ks = np.unique(g.integers(0, window.n_configs, size=n_configs, dtype=np.int64))
    out = WebReport(window.to_dict())
    for k in ks:
        out.merge(_check_chunk(window, int(k), int(k) + 1, embed, c1))
    return out


def web_duality_relation(window: WebWindow, xs: list[int], ys: list[int], t: int) -> dict:
    """Exact interlaced duality over all configurations.

    Forward walkers start at even sites ``xs`` at time 0; dual walkers start at
    odd sites ``ys`` at time ``t``, with ``x_1 < y_1 < x_2 < ... < x_n < y_n``.
    Returns the two probabilities
    ``P(X_1(t) < y_1, y_1 < X_2(t) < y_2, ...)`` and
    ``P(x_1 < Y_1(0) < x_2, ..., x_n < Y_n(0))`` as fractions.
    """
    n = len(xs)
    if len(ys) != n or n == 0:
        raise ValueError("need equally many forward and dual starts")
    inter = [v for pair in zip(xs, ys) for v in pair]
    if any(a >= b for a, b in zip(inter, inter[1:])):
        raise ValueError("starts must interlace: x_1 < y_1 < x_2 < ... < y_n")
    if any(x % 2 for x in xs) or any((t + y) % 2 == 0 for y in ys):
        raise ValueError("x must be even sites at time 0 and y odd sites at time t")
    if not 0 <= t <= window.T:
        raise ValueError("t outside the window")
    if window.n_configs > MAX_ENUMERATED:
        raise ValueError("window too large for enumeration")
    arrows = 2 * _bits(window, 0, window.n_configs).astype(np.int64) - 1
    tab = window.column_table()
    ends_f = [_forward_paths(window, arrows, tab, 0, x)[:, t] for x in xs]
    ends_d = [_dual_paths(window, arrows, tab, t, y)[:, t] for y in ys]
    if any(np.isnan(e).any() for e in ends_f + ends_d):
        raise WindowExit("a tested walker reaches the window boundary; enlarge the window")
    ev_f = np.ones(arrows.shape[0], dtype=bool)
    ev_d = np.ones(arrows.shape[0], dtype=bool)
    lower_y = -math.inf
    for i in range(n):
        ev_f &= (ends_f[i] > lower_y) & (ends_f[i] < ys[i])
        lower_y = ys[i]
        upper_x = xs[i + 1] if i + 1 < n else math.inf
        ev_d &= (ends_d[i] > xs[i]) & (ends_d[i] < upper_x)
    total = arrows.shape[0]
    p_fwd = Fraction(int(ev_f.sum()), total)
    p_dual = Fraction(int(ev_d.sum()), total)
    return {
        "xs": list(xs),
        "ys": list(ys),
        "t": t,
        "forward": p_fwd,
        "dual": p_dual,
        "equal": p_fwd == p_dual,
        "pathwise_equal": bool(np.array_equal(ev_f, ev_d)),
    }


def interlaced_cases(window: WebWindow, t: int, n: int) -> list[tuple[list[int], list[int]]]:
    """All interlaced start sets whose walkers provably stay inside the window for ``t`` steps."""
    lo, hi = window.z_min + t, window.z_max - t
    evens = [z for z in range(lo, hi + 1) if z % 2 == 0]
    odds = [z for z in range(lo, hi + 1) if (t + z) % 2 == 1]
    cases = []
    for xs in combinations(evens, n):
        for ys in combinations(odds, n):
            inter = [v for pair in zip(xs, ys) for v in pair]
            if all(a < b for a, b in zip(inter, inter[1:])):
                cases.append((list(xs), list(ys)))
    return cases

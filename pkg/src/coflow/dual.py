"""The dual backward flow of a lattice realization.

``psi~_{t,s}(y)`` is the right-continuous inverse ``v+`` of ``psi_{s,t}`` at
``y`` when ``(t, y)`` is left regular, and the left-continuous inverse ``v-``
otherwise.  A point ``(t, y)`` is left regular when the flow started at time
``t`` is left-continuous at ``y``.  Coalescence is absorbing, so on the
lattice this is decided by the first step after ``t``: if
``psi_{t,t+dt}(y-) == psi_{t,t+dt}(y)`` the equality persists for all later
times, and if not, left-continuity already fails at ``t + dt``.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .flow_lattice import FlowRealization, evaluate_flow, shift
from .step_fn import MonotoneStepFn, evaluate, has_tie, left_limit, v_minus, v_plus

RULES = ("regular", "swapped")


class BoundaryError(ValueError):
    """A generalized inverse is infinite: the spatial window is too small for the query."""


class UndecidableTie(BoundaryError):
    """A tie at the last simulated time, where left regularity cannot be decided."""


@dataclass(frozen=True)
class RegularityTag:
    t_index: int
    y: float
    regular: bool
    witness: int  # lattice index u > t used for the classification

    @property
    def tag(self) -> str:
        return "left_regular" if self.regular else "left_irregular"


def is_left_regular(flow: FlowRealization, t: float, y: float) -> RegularityTag:
    i = flow.spec.index(t)
    return RegularityTag(i, float(y), _regular(flow, i, y), i + 1)


def _regular(flow: FlowRealization, i: int, y: float) -> bool:
    if i >= flow.n_steps:
        raise UndecidableTie("no forward data after the window end; regularity is undecidable")
    step = flow.step_maps[i]
    return left_limit(step, y) == evaluate(step, y)


def select(vp: float, vm: float, regular: bool, rule: str = "regular") -> float:
    """The two-branch rule; ``rule="swapped"`` is the negative control (``v-`` at regular points)."""
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    use_plus = regular if rule == "regular" else not regular
    return vp if use_plus else vm


@dataclass
class BackwardFlowRealization:
    """Lazily evaluated dual of ``base`` with memoization keyed by ``(t, s, y)`` lattice indices."""

    base: FlowRealization
    rule: str = "regular"
    ties: list = field(default_factory=list)
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")

    def at(self, ti: int, si: int, y: float) -> float:
        """``psi~_{t_i, t_s}(y)`` by lattice indices; raises ``BoundaryError`` on infinite inverses."""
        if si > ti:
            raise ValueError("need s <= t")
        y = float(y)
        if si == ti:
            return y
        key = (ti, si, y)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        f = self.base.map_between(si, ti)
        vp, vm = v_plus(f, y), v_minus(f, y)
        if vp == vm:
            val = vp
        else:
            # a genuine tie: y is a value of psi_{s,t}, so the branch matters
            with self._lock:
                self.ties.append((ti, si, y))
            val = select(vp, vm, _regular(self.base, ti, y), self.rule)
        if not math.isfinite(val):
            raise BoundaryError(f"infinite inverse at t={ti}, s={si}, y={y}")
        with self._lock:
            self._cache[key] = val
        return val

    def __call__(self, t: float, s: float, y: float) -> float:
        spec = self.base.spec
        return self.at(spec.index(t), spec.index(s), y)

    def tag(self, t: float, y: float) -> RegularityTag:
        return is_left_regular(self.base, t, y)

    def sandwich(self, ti: int, si: int, y: float) -> tuple[float, float, float]:
        """``(v-, psi~, v+)`` at a query."""
        if si == ti:
            return y, y, y
        f = self.base.map_between(si, ti)
        return v_minus(f, y), self.at(ti, si, y), v_plus(f, y)


def dual_evaluate(flow: FlowRealization, t: float, s: float, y: float, rule: str = "regular") -> float:
    return BackwardFlowRealization(flow, rule)(t, s, y)


def dual_from_maps(forward: MonotoneStepFn | None, next_step: MonotoneStepFn | None, y: float, rule: str = "regular") -> float:
    """One dual value from ``psi_{s,t}`` and the step map after ``t`` (``None`` when unavailable).

    The next step is only consulted on a tie.
    """
    if forward is None:
        return float(y)
    vp, vm = v_plus(forward, y), v_minus(forward, y)
    if vp == vm:
        return vp
    if next_step is None:
        raise ValueError("tie at the window end; regularity is undecidable")
    regular = left_limit(next_step, y) == evaluate(next_step, y)
    return select(vp, vm, regular, rule)


def batch_dual(
    edges: np.ndarray,
    positions: np.ndarray,
    next_images: np.ndarray | None,
    ys: np.ndarray,
    rule: str = "regular",
) -> np.ndarray:
    """Vectorized dual values for many realizations at once.

    ``positions[r]`` holds ``psi_{s,t}`` on the cells of time ``s`` (breakpoints
    ``edges``); ``next_images[r]`` holds the step map after ``t`` on the cells of
    time ``t``.  Returns an array of shape ``(rows, len(ys))`` with the same
    semantics as ``dual_from_maps``; infinite inverses come back as ``+-inf``.
    ``next_images`` may be ``None`` when no query ties, as for cell-edge queries
    on the walk lattice.
    """
    ys = np.asarray(ys, dtype=np.float64)
    padded = np.concatenate(([-np.inf], edges, [np.inf]))
    out = np.empty((positions.shape[0], ys.size))
    for q, y in enumerate(ys):
        vp = padded[np.count_nonzero(positions <= y, axis=1)]
        vm = padded[np.count_nonzero(positions < y, axis=1)]
        tied = vp != vm
        if next_images is None:
            if np.any(tied):
                raise UndecidableTie(f"query {y} ties with an image value and no next step was given")
            out[:, q] = vp
            continue
        lo = np.searchsorted(edges, y, side="left")
        hi = np.searchsorted(edges, y, side="right")
        regular = next_images[:, lo] == next_images[:, hi]
        use_plus = regular if rule == "regular" else ~regular
        out[:, q] = np.where(vp == vm, vp, np.where(use_plus, vp, vm))
    return out


@dataclass
class ViolationReport:
    suite: str
    checked: int = 0
    violations: int = 0
    tie_violations: int = 0
    ties_seen: int = 0
    skipped: int = 0
    worst: float = 0.0
    examples: list = field(default_factory=list)

    @property
    def non_tie_violations(self) -> int:
        return self.violations - self.tie_violations

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items()}
        d["non_tie_violations"] = self.non_tie_violations
        d["ok"] = self.ok
        return d

    def merge(self, other: "ViolationReport") -> "ViolationReport":
        self.checked += other.checked
        self.violations += other.violations
        self.tie_violations += other.tie_violations
        self.ties_seen += other.ties_seen
        self.skipped += other.skipped
        self.worst = max(self.worst, other.worst)
        self.examples.extend(other.examples[: max(0, 5 - len(self.examples))])
        return self


def _query_y(
    flow: FlowRealization, g: np.random.Generator, si: int, ti: int, lo: float, hi: float, from_range: float
) -> float:
    """A query point at time ``t_i`` for a dual run back to ``t_si``.

    With probability ``from_range`` it is a point of the past range ``R_t``,
    where the branch rule matters.  Otherwise it is uniform on the part of the
    core window strictly inside the hull of ``psi_{s,t}``'s values, so the dual
    does not leave the simulated window; uniform queries never hit a tie.
    """
    if ti > 0 and g.random() < from_range:
        r = int(g.integers(0, ti))
        vals = flow.map_between(r, ti).vals
        inside = vals[(vals >= lo) & (vals <= hi)]
        if inside.size:
            return float(inside[g.integers(0, inside.size)])
    a, b = lo, hi
    if si < ti:
        vals = flow.map_between(si, ti).vals
        a, b = max(lo, vals[0]), min(hi, vals[-1])
        if not a < b:
            a, b = lo, hi
    return float(g.uniform(a, b))


MAX_DRAWS = 20  # draws per requested sample before giving up on queries that leave the window


def _draws(rep: ViolationReport, target: int):
    """Keep drawing until ``target`` queries were checked (skips do not count)."""
    while rep.checked < target and rep.checked + rep.skipped < MAX_DRAWS * target:
        yield


def _core(flow: FlowRealization) -> tuple[float, float]:
    spec = flow.spec
    w = spec.x_max - spec.x_min
    return spec.x_min + 0.25 * w, spec.x_max - 0.25 * w


def check_duality(
    flow: FlowRealization, dual: BackwardFlowRealization, samples: int, seed: int = 0, from_range: float = 0.0
) -> ViolationReport:
    """Sign check of ``(psi_{s,t}(x) - y) (x - psi~_{t,s}(y)) >= 0`` on random quadruples."""
    rep = ViolationReport("duality")
    g = rng.stream(seed, rng.MISC, 2)
    lo, hi = _core(flow)
    n = flow.n_steps
    ties_before = len(dual.ties)
    for _ in _draws(rep, samples):
        si, ti = sorted(int(v) for v in g.integers(0, n + 1, size=2))
        y = _query_y(flow, g, si, ti, lo, hi, from_range)
        x = float(g.uniform(lo, hi)) if g.random() < 0.5 else y
        try:
            d = dual.at(ti, si, y)
        except BoundaryError:
            rep.skipped += 1
            continue
        fx = flow.apply(si, ti, x)
        prod = (fx - y) * (x - d)
        rep.checked += 1
        if prod < 0:
            rep.violations += 1
            rep.worst = max(rep.worst, -prod)
            if len(rep.examples) < 5:
                rep.examples.append({"s": si, "t": ti, "x": x, "y": y, "product": prod})
    rep.ties_seen = len(dual.ties) - ties_before
    return rep


def check_backward_evolution(
    dual: BackwardFlowRealization, triples: int, seed: int = 0, from_range: float = 0.0
) -> ViolationReport:
    """Exact check of ``psi~_{s,r}(psi~_{t,s}(y)) == psi~_{t,r}(y)`` on sampled lattice triples."""
    rep = ViolationReport("evolution")
    flow = dual.base
    g = rng.stream(seed, rng.MISC, 3)
    lo, hi = _core(flow)
    n = flow.n_steps
    for _ in _draws(rep, triples):
        ri, si, ti = sorted(int(v) for v in g.integers(0, n + 1, size=3))
        y = _query_y(flow, g, ri, ti, lo, hi, from_range)
        n_ties = len(dual.ties)
        try:
            mid = dual.at(ti, si, y)
            two_step = dual.at(si, ri, mid)
            direct = dual.at(ti, ri, y)
        except BoundaryError:
            rep.skipped += 1
            continue
        tied = len(dual.ties) > n_ties or _tied(dual, ti, si, y) or _tied(dual, si, ri, mid) or _tied(dual, ti, ri, y)
        rep.ties_seen += int(tied)
        rep.checked += 1
        if two_step != direct:
            rep.violations += 1
            rep.tie_violations += int(tied)
            rep.worst = max(rep.worst, abs(two_step - direct))
            if len(rep.examples) < 5:
                rep.examples.append({"r": ri, "s": si, "t": ti, "y": y, "two_step": two_step, "direct": direct, "tie": tied})
    return rep


def _tied(dual: BackwardFlowRealization, ti: int, si: int, y: float) -> bool:
    if si == ti:
        return False
    return has_tie(dual.base.map_between(si, ti), y)


def check_shift_equivariance(
    flow: FlowRealization, h: float, samples: int, seed: int = 0, from_range: float = 0.0
) -> ViolationReport:
    """Compare ``psi~_{t,s}(theta_h omega, y)`` with ``psi~_{t+h,s+h}(omega, y)``.

    When the flow carries its drift and seed the shifted realization is
    re-simulated from the random streams, so the two sides share no arrays.
    """
    rep = ViolationReport("equivariance")
    spec = flow.spec
    m = round(h / spec.dt)
    extend = flow.drift is not None and flow.seed is not None
    moved = shift(flow, h, extend=extend)
    d_moved = BackwardFlowRealization(moved)
    d_orig = BackwardFlowRealization(flow)
    g = rng.stream(seed, rng.MISC, 4)
    lo, hi = _core(flow)
    n = spec.n_steps
    # moved index k corresponds to original index k + m (extended) or k (relabelled)
    offset = m if extend else 0
    k_lo, k_hi = max(0, -offset), min(n, n - offset)
    if k_lo > k_hi:
        raise ValueError("shift leaves no overlap with the simulated window")
    for _ in _draws(rep, samples):
        si, ti = sorted(int(v) for v in g.integers(k_lo, k_hi + 1, size=2))
        y = _query_y(flow, g, si + offset, ti + offset, lo, hi, from_range)
        try:
            a = d_moved.at(ti, si, y)
            b = d_orig.at(ti + offset, si + offset, y)
        except BoundaryError:
            rep.skipped += 1
            continue
        rep.checked += 1
        if a != b:
            rep.violations += 1
            rep.worst = max(rep.worst, abs(a - b))
    return rep


def check_cocycles(flow: FlowRealization, samples: int, seed: int = 0, from_range: float = 0.0) -> ViolationReport:
    """Forward and backward perfect-cocycle identities on lattice points.

    forward:  phi(t+s, w, x) == phi(t, theta_s w, phi(s, w, x))
    backward: phi~(t+s, w, x) == phi~(t, w, phi~(s, theta_t w, x))
    with ``phi(t, w, x) = w_{0,t}(x)`` and ``phi~(t, w, x) = psi~_{t,0}(w, x)``.
    """
    rep = ViolationReport("cocycle")
    spec = flow.spec
    g = rng.stream(seed, rng.MISC, 5)
    lo, hi = _core(flow)
    n = spec.n_steps
    base = BackwardFlowRealization(flow)
    shifted: dict[int, FlowRealization] = {}

    def theta(k: int) -> FlowRealization:
        if k not in shifted:
            shifted[k] = shift(flow, k * spec.dt)
        return shifted[k]

    # each draw yields a forward check and, unless it leaves the window, a backward check
    for _ in _draws(rep, 2 * samples):
        a, b = sorted(int(v) for v in g.integers(0, n + 1, size=2))
        s_, t_ = a, b - a  # s + t <= n
        x = _query_y(flow, g, 0, s_ + t_, lo, hi, from_range)
        # forward: theta_s moves time s to the origin
        w_s = theta(s_)
        lhs = flow.apply(0, s_ + t_, x)
        inner = flow.apply(0, s_, x)
        rhs = evaluate_flow(w_s, spec.t0, spec.t0 + t_ * spec.dt, inner)
        rep.checked += 1
        if lhs != rhs:
            rep.violations += 1
        # backward (roles: total time t_+s_, outer t = s_, inner s = t_)
        w_t = theta(s_)
        try:
            lhs_b = base.at(s_ + t_, 0, x)
            inner_b = BackwardFlowRealization(w_t)(spec.t0 + t_ * spec.dt, spec.t0, x)
            rhs_b = base.at(s_, 0, inner_b)
        except BoundaryError:
            rep.skipped += 1
            continue
        rep.checked += 1
        if lhs_b != rhs_b:
            rep.violations += 1
            rep.worst = max(rep.worst, abs(lhs_b - rhs_b))
    return rep


__all__ = [
    "BackwardFlowRealization",
    "BoundaryError",
    "UndecidableTie",
    "RegularityTag",
    "ViolationReport",
    "batch_dual",
    "check_backward_evolution",
    "check_cocycles",
    "check_duality",
    "check_shift_equivariance",
    "dual_evaluate",
    "dual_from_maps",
    "is_left_regular",
    "select",
]

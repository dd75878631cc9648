"""Coalescing n-point motions and the transition estimates built on them.

The simulator is independent of the flow lattice: Euler-Maruyama steps for
``n`` ordered particles with one Gaussian per coalescence class.  Adjacent
classes merge when their proposals cross or touch, or (with
``meeting="bridge"``) when the Brownian bridge of their difference hits zero
inside the step; the merged class takes the proposal of its leftmost member.
For two particles without drift this reproduces the exact law of a coalescing
pair.

Random numbers come in fixed blocks of ``rng.BLOCK`` replicas, each from its
own stream, so every estimate is independent of the thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy import stats
from scipy.special import erf, ndtr

from . import rng
from .drift import DriftSpec
from .dual import batch_dual
from .flow_lattice import LatticeSpec, batch_walk

DRIFT_CODES = {"zero": 0, "constant": 1, "linear": 2, "sine": 3}
MEETING_RULES = ("discrete", "bridge")

# stream tags within the NPOINT family
TAG_COALESCING = 0
TAG_INDEPENDENT = 1


def _drift_args(drift: DriftSpec) -> tuple[int, float, float]:
    if drift.kind not in DRIFT_CODES:
        raise ValueError("the n-point simulator supports zero, constant, linear and sine drifts")
    p = tuple(drift.params) + (0.0, 0.0)
    return DRIFT_CODES[drift.kind], p[0], p[1]


@njit(cache=True, inline="always")
def _a(code, p0, p1, x):
    if code == 0:
        return 0.0
    if code == 1:
        return p0
    if code == 2:
        return p0 + p1 * x
    return p0 * math.sin(p1 * x)


@njit(cache=True, nogil=True)
def _npoint_kernel(x0, normals, unif, dt, code, p0, p1, coalesce, bridge, keep_path):
    K, R, n = normals.shape
    sq = math.sqrt(dt)
    final = np.empty((R, n))
    before = np.empty((R, n))  # state at the last step before the first meeting
    tau = np.full(R, -1, dtype=np.int64)  # first step index at whose end a meeting is detected
    paths = np.empty((R, K + 1, n)) if keep_path else np.empty((1, 1, 1))
    x = np.empty(n)
    p = np.empty(n)
    z = np.empty(n)
    met = np.zeros(n, dtype=np.bool_)
    for r in range(R):
        for i in range(n):
            x[i] = x0[i]
        if keep_path:
            for i in range(n):
                paths[r, 0, i] = x[i]
        for k in range(K):
            for i in range(n):
                if coalesce and i > 0 and x[i] == x[i - 1]:
                    z[i] = z[i - 1]
                else:
                    z[i] = normals[k, r, i]
                p[i] = x[i] + _a(code, p0, p1, x[i]) * dt + sq * z[i]
            any_new = False
            for i in range(n - 1):
                if x[i] == x[i + 1] and coalesce:
                    met[i] = True
                    continue
                hit = p[i + 1] <= p[i]
                if not hit and bridge:
                    gap0 = x[i + 1] - x[i]
                    gap1 = p[i + 1] - p[i]
                    hit = unif[k, r, i] < math.exp(-gap0 * gap1 / dt)
                met[i] = hit
                if hit:
                    any_new = True
            if any_new and tau[r] < 0:
                tau[r] = k
                for i in range(n):
                    before[r, i] = x[i]
            if coalesce:
                # runs of met pairs take the leftmost proposal; a running max keeps order
                lead = p[0]
                x[0] = lead
                for i in range(1, n):
                    if not met[i - 1]:
                        lead = p[i]
                    v = lead
                    if v < x[i - 1]:
                        v = x[i - 1]
                    x[i] = v
            else:
                for i in range(n):
                    x[i] = p[i]
            if keep_path:
                for i in range(n):
                    paths[r, k + 1, i] = x[i]
        for i in range(n):
            final[r, i] = x[i]
        if tau[r] < 0:
            for i in range(n):
                before[r, i] = x[i]
    return final, before, tau, paths


@dataclass
class NPointSample:
    """Replicas of an n-point motion: final states, first meeting step and the pre-meeting state."""

    start: tuple[float, ...]
    drift: DriftSpec
    dt: float
    t: float
    seed: int
    coalescing: bool
    final: np.ndarray
    before_meeting: np.ndarray
    meet_step: np.ndarray
    paths: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.start)

    @property
    def N(self) -> int:
        return self.final.shape[0]


def _n_steps(dt: float, t: float) -> int:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t <= 0:
        raise ValueError("t must be positive")
    k = round(t / dt)
    if abs(k * dt - t) > 1e-9 * t:
        raise ValueError("t must be a multiple of dt")
    return int(k)


def simulate_npoint(
    start,
    drift: DriftSpec,
    dt: float,
    t: float,
    seed: int,
    N: int = 1,
    coalescing: bool = True,
    meeting: str = "bridge",
    keep_path: bool = False,
    tag: int = TAG_COALESCING,
    threads: int | None = None,
) -> NPointSample:
    """``N`` replicas of the n-point motion from ``start`` (ordered; ties are pre-coalesced).

    ``coalescing=False`` runs independent particles and only records their
    first meeting.  ``tag`` selects the stream family member, so two calls with
    equal tags share their noise exactly.
    """
    x0 = np.asarray(start, dtype=np.float64).reshape(-1)
    if x0.size == 0 or np.any(np.diff(x0) < 0):
        raise ValueError("start must be a nonempty nondecreasing vector")
    if meeting not in MEETING_RULES:
        raise ValueError(f"meeting must be one of {MEETING_RULES}")
    K = _n_steps(dt, t)
    code, p0, p1 = _drift_args(drift)
    n = x0.size

    def run(blk):
        b, lo, hi = blk
        g = rng.stream(seed, rng.NPOINT, tag, n, b)
        normals = g.standard_normal((K, hi - lo, n))
        unif = g.random((K, hi - lo, max(n - 1, 1)))
        return _npoint_kernel(x0, normals, unif, dt, code, p0, p1, coalescing, meeting == "bridge", keep_path)

    parts = rng.map_blocks(run, rng.blocks(N), threads)
    return NPointSample(
        tuple(x0.tolist()),
        drift,
        dt,
        t,
        seed,
        coalescing,
        np.concatenate([q[0] for q in parts]),
        np.concatenate([q[1] for q in parts]),
        np.concatenate([q[2] for q in parts]),
        np.concatenate([q[3] for q in parts]) if keep_path else None,
    )


@dataclass(frozen=True)
class Interval:
    lo: float = -math.inf
    hi: float = math.inf
    closed_lo: bool = False
    closed_hi: bool = False

    def __post_init__(self) -> None:
        if self.lo > self.hi or (self.lo == self.hi and not (self.closed_lo and self.closed_hi)):
            raise ValueError(f"empty interval ({self.lo}, {self.hi})")

    def contains(self, v: np.ndarray) -> np.ndarray:
        left = v >= self.lo if self.closed_lo else v > self.lo
        right = v <= self.hi if self.closed_hi else v < self.hi
        return left & right

    def __str__(self) -> str:
        return f"{'[' if self.closed_lo else '('}{self.lo:g},{self.hi:g}{']' if self.closed_hi else ')'}"


@dataclass(frozen=True)
class TransitionEstimate:
    event: str
    p_hat: float
    se: float
    N: int
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("probability estimate outside [0, 1]")

    @classmethod
    def from_indicator(cls, event: str, hits: np.ndarray, seed: int) -> "TransitionEstimate":
        N = int(hits.size)
        p = float(np.count_nonzero(hits)) / N
        return cls(event, p, math.sqrt(p * (1 - p) / N), N, seed)

    @classmethod
    def from_weights(cls, event: str, w: np.ndarray, seed: int) -> "TransitionEstimate":
        """Mean of importance weights; the standard error is the sample standard deviation over ``sqrt N``."""
        N = int(w.size)
        return cls(event, float(np.clip(w.mean(), 0.0, 1.0)), float(w.std(ddof=1) / math.sqrt(N)), N, seed)

    def row(self) -> dict:
        return {"event": self.event, "p_hat": self.p_hat, "se": self.se, "N": self.N, "seed": self.seed}


def _box_label(box) -> str:
    return "x".join(str(iv) for iv in box)


def estimate_transition(
    n: int, start, drift: DriftSpec, t: float, box, N: int, seed: int, dt: float = 1e-3, meeting: str = "bridge"
) -> TransitionEstimate:
    """Frequency of ``X(t)`` in a product of intervals, with the binomial standard error."""
    if N < 1000:
        raise ValueError("need N >= 1000")
    box = [iv if isinstance(iv, Interval) else Interval(*iv) for iv in box]
    if len(box) != n or len(start) != n:
        raise ValueError("need one start and one interval per coordinate")
    s = simulate_npoint(start, drift, dt, t, seed, N, meeting=meeting)
    hits = np.ones(N, dtype=bool)
    for i, iv in enumerate(box):
        hits &= iv.contains(s.final[:, i])
    return TransitionEstimate.from_indicator(_box_label(box), hits, seed)


def tp_checks(drift: DriftSpec, N: int = 10_000, seed: int = 0, dt: float = 1e-3) -> dict:
    """Sample-level proxies of the transition-probability conditions.

    compatibility: a marginal of the 2-point motion against the 1-point motion (two independent runs);
    diagonal: a pre-coalesced pair never separates; singleton: no atom at a fixed point;
    small_time: ``(1/t) sup_x P(|X_t - x| >= 0.1)`` decreases for ``t = 1e-2, 1e-3, 1e-4``.
    """
    iv = Interval(-math.inf, 0.3)
    two = estimate_transition(2, (0.0, 0.5), drift, 1.0, [iv, Interval()], N, seed, dt)
    one = estimate_transition(1, (0.0,), drift, 1.0, [iv], N, seed + 1, dt)
    joint_se = math.hypot(two.se, one.se)
    diag = simulate_npoint((0.2, 0.2), drift, dt, 1.0, seed + 2, N)
    single = simulate_npoint((0.0,), drift, dt, 1.0, seed + 3, N)
    eps = 0.1
    rates = []
    for ts in (1e-2, 1e-3, 1e-4):
        worst = 0.0
        for x in (-1.0, 0.0, 1.0):
            s = simulate_npoint((x,), drift, ts / 10, ts, seed + 4, N)
            worst = max(worst, float(np.mean(np.abs(s.final[:, 0] - x) >= eps)))
        rates.append(worst / ts)
    return {
        "compatibility": {"two_point": two.p_hat, "one_point": one.p_hat, "joint_se": joint_se,
                          "ok": abs(two.p_hat - one.p_hat) <= 3 * joint_se},
        "diagonal": {"separated": int(np.count_nonzero(diag.final[:, 0] != diag.final[:, 1])),
                     "ok": bool(np.all(diag.final[:, 0] == diag.final[:, 1]))},
        "singleton": {"mass_at_0": int(np.count_nonzero(single.final[:, 0] == 0.0)),
                      "ok": bool(np.all(single.final[:, 0] != 0.0))},
        "small_time": {"t": [1e-2, 1e-3, 1e-4], "rate": rates, "ok": bool(rates[0] > rates[1] > rates[2] or
                                                                      (rates[0] > rates[1] and rates[2] == 0))},
    }


def check_stopped_equivalence(
    start, drift: DriftSpec, t: float, N: int, seed: int, dt: float = 1e-3, alpha: float = 0.01, meeting: str = "bridge"
) -> dict:
    """Independent motions and coalescing motions, both stopped at their first meeting.

    shared noise: the two simulators consume the same stream and must agree
    bitwise on the stopped state and on the meeting step.  Independent noise:
    two-sample KS per coordinate of the stopped state at level ``alpha``.
    The stopped state is the last state before the meeting is detected.
    """
    n = len(start)
    if n not in (2, 3):
        raise ValueError("stopped equivalence is checked for n = 2 or 3")
    coal = simulate_npoint(start, drift, dt, t, seed, N, coalescing=True, meeting=meeting, tag=TAG_COALESCING)
    same = simulate_npoint(start, drift, dt, t, seed, N, coalescing=False, meeting=meeting, tag=TAG_COALESCING)
    indep = simulate_npoint(start, drift, dt, t, seed, N, coalescing=False, meeting=meeting, tag=TAG_INDEPENDENT)
    bitwise = bool(np.array_equal(coal.before_meeting, same.before_meeting) and np.array_equal(coal.meet_step, same.meet_step))
    ks = []
    for i in range(n):
        res = stats.ks_2samp(coal.before_meeting[:, i], indep.before_meeting[:, i])
        ks.append({"coordinate": i, "statistic": float(res.statistic), "p_value": float(res.pvalue)})
    return {
        "start": list(start),
        "drift": drift.to_dict(),
        "N": N,
        "shared_noise_bitwise": bitwise,
        "ks": ks,
        "ks_ok": all(r["p_value"] > alpha for r in ks),
        "ok": bitwise and all(r["p_value"] > alpha for r in ks),
    }


# ---------------------------------------------------------------- ordered survival


def killed_kernel(t: float, x: np.ndarray, y: np.ndarray, a: float, b: float, terms: int = 6) -> np.ndarray:
    """Transition density of Brownian motion killed outside ``[a, b]`` (method of images)."""
    if not math.isfinite(a) or not math.isfinite(b):
        if math.isinf(a) and math.isinf(b):
            return np.exp(-((y - x) ** 2) / (2 * t)) / math.sqrt(2 * math.pi * t)
        raise ValueError("use a finite interval or the whole line")
    L = b - a
    out = np.zeros(np.broadcast(x, y).shape)
    for k in range(-terms, terms + 1):
        out += np.exp(-((y - x + 2 * k * L) ** 2) / (2 * t)) - np.exp(-((y + x - 2 * a + 2 * k * L) ** 2) / (2 * t))
    return out / math.sqrt(2 * math.pi * t)


def estimate_ordered_survival(
    n: int,
    start,
    a: float,
    b: float,
    drift: DriftSpec,
    t: float,
    N: int,
    seed: int,
    method: str = "determinant",
    dt: float = 1e-3,
) -> TransitionEstimate:
    """``P(paths stay strictly ordered and inside [a, b] on [0, t])`` for independent particles.

    determinant: zero drift only.  Endpoints are drawn from the free Gaussian
    law and weighted by the Karlin-McGregor determinant of the killed kernel,
    which is unbiased for the continuous-time event.
    paths: Euler paths (any built-in drift) weighted by the product of bridge
    non-crossing probabilities between consecutive particles and to the walls.
    """
    x = np.asarray(start, dtype=np.float64)
    if x.size != n or n not in (2, 3):
        raise ValueError("n must be 2 or 3 with one start per particle")
    if not (a <= x[0] and x[-1] <= b and np.all(np.diff(x) > 0)):
        raise ValueError("need a <= x_1 < ... < x_n <= b")
    label = f"ordered_survival(n={n},start={x.tolist()},box=[{a:g},{b:g}],t={t:g})"
    if method == "determinant":
        if drift.kind != "zero":
            raise ValueError("the determinant estimator needs zero drift")
        return TransitionEstimate.from_weights(label, _km_weights(x, a, b, t, N, seed), seed)
    if method == "paths":
        return TransitionEstimate.from_weights(label, _path_weights(x, a, b, drift, t, N, seed, dt), seed)
    raise ValueError("method must be 'determinant' or 'paths'")


def _km_weights(x: np.ndarray, a: float, b: float, t: float, N: int, seed: int) -> np.ndarray:
    n = x.size
    parts = []
    for blk, lo, hi in rng.blocks(N):
        g = rng.stream(seed, rng.NPOINT, 10 + n, blk)
        y = x + math.sqrt(t) * g.standard_normal((hi - lo, n))
        # kernel matrix M[r, i, j] = q_t(x_i, y_j)
        M = killed_kernel(t, x[None, :, None], y[:, None, :], a, b)
        free = np.prod(np.exp(-((y - x) ** 2) / (2 * t)) / math.sqrt(2 * math.pi * t), axis=1)
        ordered = np.all(np.diff(y, axis=1) > 0, axis=1) & (y[:, 0] > a) & (y[:, -1] < b)
        parts.append(np.where(ordered, np.linalg.det(M) / free, 0.0))
    return np.concatenate(parts)


@njit(cache=True, nogil=True)
def _path_weight_kernel(x0, normals, dt, code, p0, p1, a, b):
    K, R, n = normals.shape
    sq = math.sqrt(dt)
    w = np.ones(R)
    x = np.empty(n)
    p = np.empty(n)
    for r in range(R):
        for i in range(n):
            x[i] = x0[i]
        for k in range(K):
            for i in range(n):
                p[i] = x[i] + _a(code, p0, p1, x[i]) * dt + sq * normals[k, r, i]
            alive = p[0] > a and p[n - 1] < b
            for i in range(n - 1):
                if p[i + 1] <= p[i]:
                    alive = False
            if not alive:
                w[r] = 0.0
                break
            f = (1.0 - math.exp(-2.0 * (x[0] - a) * (p[0] - a) / dt)) * (1.0 - math.exp(-2.0 * (b - x[n - 1]) * (b - p[n - 1]) / dt))
            for i in range(n - 1):
                f *= 1.0 - math.exp(-(x[i + 1] - x[i]) * (p[i + 1] - p[i]) / dt)
            w[r] *= f
            for i in range(n):
                x[i] = p[i]
    return w


def _path_weights(x, a, b, drift, t, N, seed, dt) -> np.ndarray:
    K = _n_steps(dt, t)
    code, p0, p1 = _drift_args(drift)
    a_, b_ = (float(a), float(b))

    def run(blk):
        bi, lo, hi = blk
        g = rng.stream(seed, rng.NPOINT, 20 + x.size, bi)
        return _path_weight_kernel(x, g.standard_normal((K, hi - lo, x.size)), dt, code, p0, p1, a_, b_)

    return np.concatenate(rng.map_blocks(run, rng.blocks(N)))


def survival_exponent(
    n: int,
    separations,
    N: int,
    seed: int,
    t: float = 1.0,
    box: tuple[float, float] = (-10.0, 10.0),
    drift: DriftSpec | None = None,
    method: str = "determinant",
) -> dict:
    """Log-log slope of the ordered-survival probability against ``x_n - x_1``.

    Starts are equally spaced and centred at 0.  Also reports
    ``max p / d^3`` (n = 3), the empirical constant of the cubic bound.
    """
    drift = DriftSpec.zero() if drift is None else drift
    rows = []
    for i, d in enumerate(separations):
        start = np.linspace(-d / 2, d / 2, n)
        est = estimate_ordered_survival(n, start, box[0], box[1], drift, t, N, seed + i, method)
        rows.append({"d": float(d), "p_hat": est.p_hat, "se": est.se})
    logd = np.log([r["d"] for r in rows])
    logp = np.log([r["p_hat"] for r in rows])
    slope, intercept = np.polyfit(logd, logp, 1)
    out = {"n": n, "rows": rows, "slope": float(slope), "intercept": float(intercept)}
    if n == 3:
        out["C_cubic"] = max(r["p_hat"] / r["d"] ** 3 for r in rows)
    return out


# ---------------------------------------------------------------- duality with the flow lattice


@dataclass(frozen=True)
class DualLattice:
    """Lattice used for dual-side estimates (coarse: only laws are compared, not paths)."""

    dt: float = 0.02
    dx: float = 0.2
    x_min: float = -10.0
    x_max: float = 10.0
    margin: float = 2.0

    def spec(self, t: float) -> LatticeSpec:
        return LatticeSpec(0.0, _n_steps(self.dt, t), self.dt, self.x_min, self.x_max, self.dx, self.margin)

    def snap_grid(self, x: float) -> float:
        """Nearest grid point (forward starts)."""
        return self.x_min + round((x - self.x_min) / self.dx) * self.dx

    def snap_edge(self, y: float) -> float:
        """Nearest cell edge (dual starts): no dual query ever ties with an image value."""
        return self.x_min + (math.floor((y - self.x_min) / self.dx) + 0.5) * self.dx


def lattice_dual_samples(
    drift: DriftSpec, ys, times, N: int, seed: int, lattice: DualLattice = DualLattice(), threads: int | None = None
) -> dict:
    """``psi~_{t,0}(y)`` for fresh lattice realizations, each ``t`` in ``times`` from one run.

    ``ys`` must be cell edges.  Returns ``{t: array (N, len(ys))}`` plus
    ``{("forward", t): array (N, n_points)}`` with the forward images of all
    grid points (used for pathwise cross-checks) and the reflection count.
    """
    t_max = max(times)
    spec = lattice.spec(t_max)
    steps = {t: _n_steps(lattice.dt, t) for t in times}
    edges = spec.edges()
    ys = np.asarray(ys, dtype=np.float64)
    grid = spec.grid()
    if np.any(np.isin(ys, grid)):
        raise ValueError("dual queries must avoid grid points")

    def run(blk):
        b, lo, hi = blk
        res = batch_walk(spec, drift, seed, b, hi - lo, list(steps.values()))
        out = {t: batch_dual(edges, res[k], None, ys) for t, k in steps.items()}
        out.update({("forward", t): res[k] for t, k in steps.items()})
        out["flagged"] = res["flagged"]
        return out

    parts = rng.map_blocks(run, rng.blocks(N), threads)
    merged = {key: np.concatenate([p[key] for p in parts]) for key in parts[0] if key != "flagged"}
    merged["flagged"] = sum(p["flagged"] for p in parts)
    merged["grid"] = grid
    return merged


@dataclass
class DualRelationEstimate:
    n: int
    xs: list
    ys: list
    t: float
    drift: dict
    forward: TransitionEstimate
    dual: TransitionEstimate
    gap: float
    combined_se: float
    pathwise_mismatches: int
    closed_form: float | None = None

    @property
    def ok(self) -> bool:
        return self.gap <= 3 * self.combined_se and self.pathwise_mismatches == 0

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["forward"] = self.forward.row()
        d["dual"] = self.dual.row()
        d["ok"] = self.ok
        return d


def _check_interlaced(xs, ys) -> None:
    inter = [v for pair in zip(xs, ys) for v in pair]
    if len(xs) != len(ys) or not xs or any(a >= b for a, b in zip(inter, inter[1:])):
        raise ValueError("need x_1 < y_1 < x_2 < ... < x_n < y_n")


def _forward_event(vals: np.ndarray, ys) -> np.ndarray:
    """``X_1 < y_1``, ``y_{i-1} < X_i < y_i``."""
    hit = vals[:, 0] < ys[0]
    for i in range(1, len(ys)):
        hit &= (vals[:, i] > ys[i - 1]) & (vals[:, i] < ys[i])
    return hit


def _dual_event(vals: np.ndarray, xs) -> np.ndarray:
    """``x_i < Y_i < x_{i+1}``, ``x_n < Y_n``."""
    n = len(xs)
    hit = np.ones(vals.shape[0], dtype=bool)
    for i in range(n):
        upper = xs[i + 1] if i + 1 < n else math.inf
        hit &= (vals[:, i] > xs[i]) & (vals[:, i] < upper)
    return hit


def closed_form_one_point(drift: DriftSpec, x: float, y: float, t: float) -> float | None:
    """``P(x, (-inf, y))`` for the one-point motion when it is Gaussian in closed form."""
    if drift.kind == "zero":
        return float(ndtr((y - x) / math.sqrt(t)))
    if drift.kind == "constant":
        c = drift.params[0]
        return float(ndtr((y - x - c * t) / math.sqrt(t)))
    if drift.kind == "linear":
        c0, c1 = drift.params
        if c1 == 0:
            return float(ndtr((y - x - c0 * t) / math.sqrt(t)))
        m = (x + c0 / c1) * math.exp(c1 * t) - c0 / c1
        v = (math.exp(2 * c1 * t) - 1) / (2 * c1)
        return float(ndtr((y - m) / math.sqrt(v)))
    return None


def interlaced_closed_form(drift: DriftSpec, xs, ys, t: float) -> float | None:
    """Exact interlaced probability for Gaussian one-point laws.

    The dual event forces the backward particles apart, so their coalescence
    never enters and the Karlin-McGregor determinant of one-point dual
    probabilities ``det[P~_t(y_i, (x_j, x_{j+1}))]`` gives the value.
    """
    laws = [dual_closed_form(drift, y, t) for y in ys]
    if any(v is None for v in laws):
        return None
    n = len(xs)
    uppers = list(xs[1:]) + [math.inf]
    M = np.array([[ndtr((uppers[j] - m) / s) - ndtr((xs[j] - m) / s) for j in range(n)] for m, s in laws])
    return float(np.linalg.det(M))


def estimate_dual_relation(
    n: int,
    xs,
    ys,
    drift: DriftSpec,
    t: float,
    N: int,
    seed: int,
    dt: float = 1e-3,
    lattice: DualLattice = DualLattice(),
    samples: dict | None = None,
) -> DualRelationEstimate:
    """Both sides of the interlaced duality relation.

    forward: coalescing n-point motion from ``xs`` (this module's simulator).
    dual: backward images of ``ys`` through fresh lattice realizations, which
    come from ``samples`` when precomputed by ``lattice_dual_samples``.
    ``xs`` and ``ys`` are first snapped to lattice grid points and cell edges.
    """
    xs = [lattice.snap_grid(x) for x in xs]
    ys = [lattice.snap_edge(y) for y in ys]
    if len(xs) != n:
        raise ValueError("need n forward starts")
    _check_interlaced(xs, ys)
    if samples is None:
        samples = lattice_dual_samples(drift, ys, [t], N, seed)
        cols = list(range(n))
    else:
        cols = [int(np.flatnonzero(samples["ys"] == y)[0]) for y in ys]
    dual_vals = samples[t][:N][:, cols]
    ev_d = _dual_event(dual_vals, xs)
    # pathwise: the same lattice rows seen forward from the grid points xs
    grid = samples["grid"]
    fcols = [int(np.argmin(np.abs(grid - x))) for x in xs]
    ev_lattice_fwd = _forward_event(samples[("forward", t)][:N][:, fcols], ys)
    mismatches = int(np.count_nonzero(ev_d != ev_lattice_fwd))
    fwd = simulate_npoint(xs, drift, dt, t, seed + 7919, N)
    ev_f = _forward_event(fwd.final, ys)
    label_f = f"P({n},x={xs},t={t:g})[(-inf,{ys[0]:g})" + "".join(f"x({a:g},{b:g})" for a, b in zip(ys, ys[1:])) + "]"
    label_d = f"Pdual({n},y={ys},t={t:g})[" + "x".join(
        f"({xs[i]:g},{xs[i + 1] if i + 1 < n else math.inf:g})" for i in range(n)) + "]"
    e_f = TransitionEstimate.from_indicator(label_f, ev_f, seed + 7919)
    e_d = TransitionEstimate.from_indicator(label_d, ev_d, seed)
    cf = interlaced_closed_form(drift, xs, ys, t)
    return DualRelationEstimate(
        n, xs, ys, t, drift.to_dict(), e_f, e_d, abs(e_f.p_hat - e_d.p_hat), math.hypot(e_f.se, e_d.se), mismatches, cf
    )


def dual_closed_form(drift: DriftSpec, y: float, t: float) -> tuple[float, float] | None:
    """Mean and standard deviation of the dual one-point law (drift ``-a``) from ``y``."""
    neg = drift.negated()
    if neg.kind == "zero":
        return y, math.sqrt(t)
    if neg.kind == "constant":
        return y + neg.params[0] * t, math.sqrt(t)
    if neg.kind == "linear":
        c0, c1 = neg.params
        if c1 == 0:
            return y + c0 * t, math.sqrt(t)
        m = (y + c0 / c1) * math.exp(c1 * t) - c0 / c1
        return m, math.sqrt((math.exp(2 * c1 * t) - 1) / (2 * c1))
    return None


def check_dual_drift(
    drift: DriftSpec,
    t: float,
    y: float,
    N: int,
    seed: int,
    alpha: float = 0.01,
    dt: float = 1e-3,
    lattice: DualLattice = DualLattice(),
    samples: dict | None = None,
) -> dict:
    """Law of ``psi~_{t,0}(y)`` against the drift ``-a`` one-point motion.

    Lattice dual values are cell edges; each is spread uniformly over the cell
    width (a randomized continuity correction, drawn from its own stream) before
    the one-sample KS test against the closed form and the two-sample KS test
    against forward Euler-Maruyama with drift ``-a``.
    """
    y = lattice.snap_edge(y)
    if samples is None:
        samples = lattice_dual_samples(drift, [y], [t], N, seed)
        col = 0
    else:
        col = int(np.flatnonzero(samples["ys"] == y)[0])
    raw = samples[t][:N, col]
    jitter = rng.stream(seed, rng.MISC, 30).uniform(-0.5, 0.5, raw.size) * lattice.dx
    dual = raw + jitter
    fwd = simulate_npoint((y,), drift.negated(), dt, t, seed + 104729, N).final[:, 0]
    two = stats.ks_2samp(dual, fwd)
    out = {
        "drift": drift.to_dict(),
        "t": t,
        "y": y,
        "N": int(raw.size),
        "dual_mean": float(dual.mean()),
        "dual_sd": float(dual.std(ddof=1)),
        "ks_two_sample": {"statistic": float(two.statistic), "p_value": float(two.pvalue)},
        "flagged": int(samples.get("flagged", 0)),
    }
    ok = two.pvalue > alpha
    cf = dual_closed_form(drift, y, t)
    if cf is not None:
        one = stats.kstest(dual, "norm", args=cf)
        out["closed_form"] = {"mean": cf[0], "sd": cf[1]}
        out["ks_closed_form"] = {"statistic": float(one.statistic), "p_value": float(one.pvalue)}
        ok = ok and one.pvalue > alpha
    out["ok"] = bool(ok)
    return out


def check_tail_lemma(drift: DriftSpec, t: float, c: float, x_grid, N: int, seed: int, dt: float = 1e-3) -> dict:
    """``P_t(x, [c, inf))`` along an increasing ``x_grid``: trend and the value at the last point."""
    xs = [float(x) for x in x_grid]
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("x_grid must be increasing")
    rows = []
    for i, x in enumerate(xs):
        s = simulate_npoint((x,), drift, dt, t, seed + i, N)
        est = TransitionEstimate.from_indicator(f"P_t({x:g},[{c:g},inf))", s.final[:, 0] >= c, seed + i)
        rows.append(est)
    # nondecreasing within noise: no drop larger than 3 combined SE
    drops = [max(0.0, a.p_hat - b.p_hat) - 3 * math.hypot(a.se, b.se) for a, b in zip(rows, rows[1:])]
    return {
        "drift": drift.to_dict(),
        "t": t,
        "c": c,
        "rows": [dict(r.row(), x=x) for r, x in zip(rows, xs)],
        "monotone": all(d <= 0 for d in drops),
        "final": rows[-1].p_hat,
        "final_ok": rows[-1].p_hat >= 1 - 1e-3,
        "ok": all(d <= 0 for d in drops) and rows[-1].p_hat >= 1 - 1e-3,
    }


def gaussian_coalescence_probability(d: float, t: float) -> float:
    """Two Brownian particles at distance ``d`` meet before ``t`` with probability ``2 (1 - Phi(d / sqrt(2 t)))``."""
    return float(1.0 - erf(d / (2.0 * math.sqrt(t))))

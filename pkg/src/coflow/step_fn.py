"""Right-continuous nondecreasing step functions of the real line.

A step function is stored in canonical form: strictly increasing breakpoints
``bp`` and piece values ``vals`` (one more than breakpoints), with no two
adjacent pieces sharing a value.  Piece ``i`` covers ``[bp[i-1], bp[i])`` with
the conventions ``bp[-1] = -inf`` and ``bp[len(bp)] = +inf``.

Generalized inverses return ``float('inf')`` / ``float('-inf')`` when the
infimum is over an empty set or unbounded below.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "MonotoneStepFn",
    "canonical",
    "compose",
    "evaluate",
    "left_limit",
    "right_limit",
    "v_minus",
    "v_plus",
]


def _frozen(a: Iterable[float]) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MonotoneStepFn:
    bp: np.ndarray
    vals: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "bp", _frozen(self.bp).reshape(-1))
        object.__setattr__(self, "vals", _frozen(self.vals).reshape(-1))
        if self.vals.size != self.bp.size + 1:
            raise ValueError("need len(vals) == len(bp) + 1")
        if not (np.all(np.isfinite(self.bp)) and np.all(np.isfinite(self.vals))):
            raise ValueError("breakpoints and values must be finite")
        if np.any(np.diff(self.bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(self.vals) < 0):
            raise ValueError("values must be nondecreasing")
        # piece i starts at padded[i]; shared by both generalized inverses
        padded = np.concatenate(([-math.inf], self.bp, [math.inf]))
        padded.setflags(write=False)
        object.__setattr__(self, "_starts", padded)

    @classmethod
    def constant(cls, c: float) -> "MonotoneStepFn":
        return cls(np.empty(0), np.array([c]))

    @property
    def n_breakpoints(self) -> int:
        return int(self.bp.size)

    def __call__(self, x):
        return evaluate(self, x)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MonotoneStepFn):
            return NotImplemented
        return np.array_equal(self.bp, other.bp) and np.array_equal(self.vals, other.vals)

    def __hash__(self) -> int:
        return hash((self.bp.tobytes(), self.vals.tobytes()))

    def __repr__(self) -> str:
        return f"MonotoneStepFn(bp={self.bp.tolist()}, vals={self.vals.tolist()})"

    def is_canonical(self) -> bool:
        return not np.any(self.vals[1:] == self.vals[:-1])

    def image(self) -> np.ndarray:
        """Distinct values taken by the function (sorted)."""
        return self.vals

    def to_dict(self) -> dict:
        return {"bp": self.bp.tolist(), "vals": self.vals.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "MonotoneStepFn":
        return canonical(d["bp"], d["vals"])

    @classmethod
    def from_json(cls, s: str) -> "MonotoneStepFn":
        return cls.from_dict(json.loads(s))


def canonical(bp, vals) -> MonotoneStepFn:
    """Build a step function, merging adjacent pieces with equal values."""
    bp = np.asarray(bp, dtype=np.float64).reshape(-1)
    vals = np.asarray(vals, dtype=np.float64).reshape(-1)
    if vals.size != bp.size + 1:
        raise ValueError("need len(vals) == len(bp) + 1")
    keep = vals[1:] != vals[:-1]
    return MonotoneStepFn(bp[keep], np.concatenate((vals[:1], vals[1:][keep])))


def evaluate(f: MonotoneStepFn, x):
    """Value of the piece containing ``x`` (right-continuous at breakpoints)."""
    idx = np.searchsorted(f.bp, x, side="right")
    out = f.vals[idx]
    return float(out) if np.ndim(out) == 0 else out


def left_limit(f: MonotoneStepFn, x):
    """``lim_{z -> x-} f(z)``."""
    idx = np.searchsorted(f.bp, x, side="left")
    out = f.vals[idx]
    return float(out) if np.ndim(out) == 0 else out


def right_limit(f: MonotoneStepFn, x):
    """``lim_{z -> x+} f(z)``; equals ``evaluate`` by right-continuity."""
    return evaluate(f, x)


def _from_valid(bp: np.ndarray, vals: np.ndarray) -> MonotoneStepFn:
    # inputs already satisfy every invariant; skips validation on the composition hot path
    keep = vals[1:] != vals[:-1]
    f = object.__new__(MonotoneStepFn)
    bp = bp[keep]
    vals = np.concatenate((vals[:1], vals[1:][keep]))
    starts = np.concatenate(([-math.inf], bp, [math.inf]))
    for a in (bp, vals, starts):
        a.setflags(write=False)
    object.__setattr__(f, "bp", bp)
    object.__setattr__(f, "vals", vals)
    object.__setattr__(f, "_starts", starts)
    return f


def compose(g: MonotoneStepFn, f: MonotoneStepFn) -> MonotoneStepFn:
    """The step function ``x -> g(f(x))``, canonicalized."""
    return _from_valid(f.bp, np.asarray(evaluate(g, f.vals), dtype=np.float64))


def _inverse(f: MonotoneStepFn, idx):
    # idx is the first piece whose value passes the threshold
    out = f._starts[idx]
    return float(out) if np.ndim(out) == 0 else out


def v_plus(f: MonotoneStepFn, y):
    """``inf{x : f(x) > y}`` (right-continuous generalized inverse)."""
    return _inverse(f, np.searchsorted(f.vals, y, side="right"))


def v_minus(f: MonotoneStepFn, y):
    """``inf{x : f(x) >= y}`` (left-continuous generalized inverse)."""
    return _inverse(f, np.searchsorted(f.vals, y, side="left"))


def has_tie(f: MonotoneStepFn, y) -> bool:
    """True when ``y`` is a value taken by ``f`` (so ``v_minus < v_plus``)."""
    i = np.searchsorted(f.vals, y, side="left")
    return bool(i < f.vals.size and f.vals[i] == y)

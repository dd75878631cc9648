"""Lipschitz drift coefficients for the Arratia flow with drift."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

KINDS = ("zero", "constant", "linear", "sine", "custom")


@dataclass(frozen=True)
class DriftSpec:
    """Drift ``a`` with Lipschitz constant ``lipschitz_L``.

    kinds: ``zero``; ``constant`` (params ``(c,)``); ``linear`` with
    ``a(x) = c0 + c1 x`` (params ``(c0, c1)``); ``sine`` with
    ``a(x) = A sin(k x)`` (params ``(A, k)``); ``custom`` with a callable and a
    declared Lipschitz constant, which is checked by sampling.
    """

    kind: str = "zero"
    params: tuple[float, ...] = ()
    lipschitz_L: float | None = None
    fn: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown drift kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        need = {"zero": 0, "constant": 1, "linear": 2, "sine": 2}
        if self.kind in need and len(self.params) != need[self.kind]:
            raise ValueError(f"drift kind {self.kind!r} takes {need[self.kind]} params")
        if self.kind == "custom":
            if self.fn is None or self.lipschitz_L is None:
                raise ValueError("custom drift needs fn and lipschitz_L")
        else:
            object.__setattr__(self, "lipschitz_L", self._natural_L())
        if not math.isfinite(self.lipschitz_L) or self.lipschitz_L < 0:
            raise ValueError("Lipschitz constant must be finite and >= 0")
        self.verify_lipschitz()

    @classmethod
    def zero(cls) -> "DriftSpec":
        return cls("zero")

    @classmethod
    def constant(cls, c: float) -> "DriftSpec":
        return cls("constant", (c,))

    @classmethod
    def linear(cls, c0: float, c1: float) -> "DriftSpec":
        return cls("linear", (c0, c1))

    @classmethod
    def sine(cls, amplitude: float = 1.0, k: float = 1.0) -> "DriftSpec":
        return cls("sine", (amplitude, k))

    def _natural_L(self) -> float:
        if self.kind in ("zero", "constant"):
            return 0.0
        if self.kind == "linear":
            return abs(self.params[1])
        return abs(self.params[0] * self.params[1])

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind == "constant":
            return np.full_like(x, self.params[0])
        if self.kind == "linear":
            return self.params[0] + self.params[1] * x
        if self.kind == "sine":
            return self.params[0] * np.sin(self.params[1] * x)
        return np.asarray(self.fn(x), dtype=np.float64)

    def negated(self) -> "DriftSpec":
        """The drift ``-a`` (law of the dual one-point motion)."""
        if self.kind == "zero":
            return self
        if self.kind == "constant":
            return DriftSpec("constant", (-self.params[0],))
        if self.kind == "linear":
            return DriftSpec("linear", (-self.params[0], -self.params[1]))
        if self.kind == "sine":
            return DriftSpec("sine", (-self.params[0], self.params[1]))
        fn = self.fn
        return DriftSpec("custom", (), self.lipschitz_L, lambda x: -np.asarray(fn(x)))

    def sup_bound(self, a: float, b: float, n: int = 4097) -> float:
        """``M = sup_{[a, b]} |a(x)|``."""
        if a > b:
            raise ValueError("need a <= b")
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return abs(self.params[0])
        if self.kind == "linear":
            return float(max(abs(self(a)), abs(self(b))))
        if self.kind == "sine":
            A, k = self.params
            if k == 0:
                return 0.0
            # |sin| is monotone between consecutive peaks at (m + 1/2) pi
            lo, hi = sorted((k * a, k * b))
            if math.floor(hi / math.pi - 0.5) >= math.ceil(lo / math.pi - 0.5):
                return abs(A)
            return float(max(abs(self(a)), abs(self(b))))
        xs = np.linspace(a, b, n)
        # pad by the Lipschitz modulus over half a grid cell
        return float(np.max(np.abs(self(xs))) + self.lipschitz_L * (b - a) / (2 * (n - 1)))

    def verify_lipschitz(self, lo: float = -50.0, hi: float = 50.0, n: int = 20001) -> None:
        xs = np.linspace(lo, hi, n)
        ys = self(xs)
        if not np.all(np.isfinite(ys)):
            raise ValueError("drift is not finite on the sampling range")
        slopes = np.abs(np.diff(ys)) / np.diff(xs)
        if np.max(slopes, initial=0.0) > self.lipschitz_L * (1 + 1e-9) + 1e-12:
            raise ValueError(
                f"drift violates the declared Lipschitz bound L={self.lipschitz_L}: "
                f"sampled slope {np.max(slopes):.6g}"
            )

    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise ValueError("custom drifts are not serializable")
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "DriftSpec":
        unknown = set(d) - {"kind", "params"}
        if unknown:
            raise ValueError(f"unknown drift keys: {sorted(unknown)}")
        return cls(d.get("kind", "zero"), tuple(d.get("params", ())))


PRESETS = {
    "zero": DriftSpec.zero(),
    "constant": DriftSpec.constant(1.0),
    "linear": DriftSpec.linear(0.0, -1.0),
    "sine": DriftSpec.sine(1.0, 1.0),
}

"""TOML experiment configs: typed sections, unknown keys rejected before any simulation."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from .drift import DriftSpec
from .flow_lattice import LatticeSpec

KINDS = ("acceptance", "simulate", "dual", "verify", "estimate", "dualcheck", "tpcheck", "bounds", "web")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _take(section: str, raw: dict, cls):
    if not isinstance(raw, dict):
        raise ConfigError(f"[{section}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"[{section}]: {e}") from None


@dataclass(frozen=True)
class ExperimentSection:
    kind: str
    seed: int = 0
    threads: int = 1
    out: str = "report.json"
    csv: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind: unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**63:
            raise ValueError("seed: must be a nonnegative integer")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ValueError("threads: must be a positive integer")


@dataclass(frozen=True)
class AcceptanceSection:
    criteria: list = field(default_factory=lambda: list(range(1, 13)))
    quick: bool = False

    def __post_init__(self) -> None:
        bad = [c for c in self.criteria if c not in range(1, 13)]
        if bad:
            raise ValueError(f"criteria: unknown criterion ids {bad}")


@dataclass(frozen=True)
class SimulateSection:
    replicas: int = 1
    dump: str = ""


@dataclass(frozen=True)
class VerifySection:
    replicas: int = 4
    n_triples: int = 200
    duality_samples: int = 1000
    evolution_triples: int = 100
    shift: float = 0.25
    shift_samples: int = 10
    cocycle_samples: int = 5


@dataclass(frozen=True)
class DualSection:
    replica: int = 0
    queries: list = field(default_factory=list)  # [t, s, y] triples
    rule: str = "regular"


@dataclass(frozen=True)
class EstimateSection:
    n: int = 1
    start: list = field(default_factory=lambda: [0.0])
    box: list = field(default_factory=lambda: [[-math.inf, 0.0]])
    t: float = 1.0
    N: int = 10_000
    dt: float = 1e-3
    survival: bool = False
    interval: list = field(default_factory=lambda: [-10.0, 10.0])


@dataclass(frozen=True)
class DualcheckSection:
    mode: str = "drift"  # "drift" or "relation"
    t: float = 1.0
    y: float = 0.1
    xs: list = field(default_factory=lambda: [0.0])
    ys: list = field(default_factory=lambda: [0.1])
    N: int = 10_000
    dt: float = 2e-3

    def __post_init__(self) -> None:
        if self.mode not in ("drift", "relation"):
            raise ValueError("mode: must be 'drift' or 'relation'")


@dataclass(frozen=True)
class TpcheckSection:
    N: int = 10_000
    dt: float = 1e-3


@dataclass(frozen=True)
class BoundsSection:
    alpha: float = -1.0
    beta: float = 1.0
    horizon: float = 1.0
    p: float = 1.25
    C: float = 1.0
    n_max: int = 20


@dataclass(frozen=True)
class WebSection:
    T: int = 4
    Z: int = 8
    mode: str = "enumerate"
    samples: int = 10_000
    embed: bool = True

    def __post_init__(self) -> None:
        if self.mode not in ("enumerate", "sample"):
            raise ValueError("mode: must be 'enumerate' or 'sample'")


SECTIONS = {
    "acceptance": AcceptanceSection,
    "simulate": SimulateSection,
    "verify": VerifySection,
    "dual": DualSection,
    "estimate": EstimateSection,
    "dualcheck": DualcheckSection,
    "tpcheck": TpcheckSection,
    "bounds": BoundsSection,
    "web": WebSection,
}
# kinds that need [lattice] and/or [drift]
NEEDS_LATTICE = {"simulate", "verify", "dual"}
NEEDS_DRIFT = {"simulate", "verify", "dual", "estimate", "dualcheck", "tpcheck", "bounds"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentSection
    params: object
    lattice: LatticeSpec | None
    drift: DriftSpec | None
    raw: dict

    @property
    def kind(self) -> str:
        return self.experiment.kind


def parse_config(raw: dict) -> ExperimentConfig:
    allowed = {"experiment", "lattice", "drift", *SECTIONS}
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    if "experiment" not in raw:
        raise ConfigError("missing [experiment] section")
    exp = _take("experiment", raw["experiment"], ExperimentSection)
    extra = sorted(k for k in SECTIONS if k in raw and k != exp.kind)
    if extra:
        raise ConfigError(f"section(s) {', '.join(extra)} do not apply to kind {exp.kind!r}")
    params = _take(exp.kind, raw.get(exp.kind, {}), SECTIONS[exp.kind])
    lattice = drift = None
    if exp.kind in NEEDS_LATTICE:
        if "lattice" not in raw:
            raise ConfigError(f"kind {exp.kind!r} needs a [lattice] section")
        lattice = _take("lattice", raw["lattice"], LatticeSpec)
        try:
            lattice.check_walk()
        except ValueError as e:
            raise ConfigError(f"[lattice]: {e}") from None
    elif "lattice" in raw:
        raise ConfigError(f"[lattice] does not apply to kind {exp.kind!r}")
    if exp.kind in NEEDS_DRIFT:
        block = raw.get("drift", {"kind": "zero"})
        if not isinstance(block, dict):
            raise ConfigError("[drift] must be a table")
        try:
            drift = DriftSpec.from_dict(block)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[drift] kind/params: {e}") from None
    elif "drift" in raw:
        raise ConfigError(f"[drift] does not apply to kind {exp.kind!r}")
    return ExperimentConfig(exp, params, lattice, drift, raw)


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        text = Path(path).read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        raw = tomli.loads(text.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from None
    return parse_config(raw)


def content_hash(raw: dict) -> str:
    """Git blob hash of the canonical JSON form of the inputs."""
    body = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha1(b"blob %d\0" % len(body) + body).hexdigest()

"""Coalescing stochastic flows on the line, their dual flows, and numerical checks of both."""

from .drift import PRESETS, DriftSpec
from .dual import BackwardFlowRealization, dual_evaluate
from .flow_lattice import FlowRealization, LatticeSpec, simulate_flow
from .step_fn import MonotoneStepFn

__version__ = "0.1.0"

__all__ = [
    "BackwardFlowRealization",
    "DriftSpec",
    "FlowRealization",
    "LatticeSpec",
    "MonotoneStepFn",
    "PRESETS",
    "dual_evaluate",
    "simulate_flow",
]

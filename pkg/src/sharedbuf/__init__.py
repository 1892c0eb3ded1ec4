"""Admission control for a shared-memory output-queued switch."""

from .core import BufferState, Packet, SwitchConfig, Trace, validate_trace
from .oracle import OptLimits, offline_opt, opt_count_frontier
from .policies import POLICIES, build_thresholds, make_policy
from .simulator import differential, replay_acceptance, simulate, simulate_lockstep

__version__ = "0.1.0"

__all__ = [
    "BufferState", "Packet", "SwitchConfig", "Trace", "validate_trace",
    "OptLimits", "offline_opt", "opt_count_frontier",
    "POLICIES", "build_thresholds", "make_policy",
    "differential", "replay_acceptance", "simulate", "simulate_lockstep",
    "__version__",
]

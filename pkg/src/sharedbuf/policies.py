"""Admission policies for the shared buffer.

The Harmonic family works off a table of harmonic thresholds
``T_k = D / k`` with ``D = B / (1 + ln n)``. Runtime comparisons use the
integer ceilings ``U_k = ceil(T_k)``; for an integer occupancy ``o`` the
tests ``o >= T_k`` and ``o >= U_k`` agree, so nothing is lost.

Modified Harmonic keeps, per port, the index of the next threshold above
the queue, and a table of how many ports sit at or above each threshold.
Several consecutive ``U_k`` can coincide once ``T_k - T_{k+1} < 1``; the
bookkeeping therefore works on the distinct threshold *levels*, which keeps
every arrival at a constant number of operations for any ``n``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from typing import NamedTuple, Sequence

from .core import BufferState, SwitchConfig


class ConsistencyError(AssertionError):
    """Incremental bookkeeping disagrees with the buffer it tracks."""


class ThresholdPrecisionWarning(UserWarning):
    pass


class Cause(str, enum.Enum):
    THRESHOLD = "threshold"
    NONE_THRESHOLD = "none-threshold"
    GUARD = "guard"
    BUDGET = "budget"
    RULE = "rule"


class Decision(NamedTuple):
    accept: bool
    cause: Cause | None = None
    # Threshold index k* (Modified Harmonic) or violated budget index (Harmonic).
    k: int | None = None


ACCEPT = Decision(True)


@dataclass(frozen=True)
class ThresholdTable:
    n: int
    B: int
    D: float
    T: tuple[float, ...]
    U: tuple[int, ...]
    prefix_budget: tuple[float, ...]
    # Distinct values of U in decreasing order and the k-range each covers.
    level_value: tuple[int, ...]
    level_lo: tuple[int, ...]
    level_hi: tuple[int, ...]
    level_of: tuple[int, ...]  # level_of[k - 1]
    precision_mismatches: tuple[int, ...] = ()

    @property
    def levels(self) -> int:
        return len(self.level_value)

    def t(self, k: int) -> float:
        return self.T[k - 1]

    def u(self, k: int) -> int:
        return self.U[k - 1]

    def q_index_scan(self, occ: int) -> int | None:
        """Largest k with ``occ < T_k``, by a linear scan over the reals."""
        best = None
        for k, tk in enumerate(self.T, start=1):
            if occ < tk:
                best = k
        return best


def _ceil_high_precision(n: int, B: int, digits: int = 60) -> list[int]:
    with localcontext() as ctx:
        ctx.prec = digits
        d = Decimal(B) / (1 + Decimal(n).ln())
        out = []
        for k in range(1, n + 1):
            t = d / k
            c = int(t.to_integral_value(rounding="ROUND_CEILING"))
            out.append(c)
        return out


def build_thresholds(config: SwitchConfig) -> ThresholdTable:
    n, B = config.n, config.B
    D = B / (1.0 + math.log(n))
    T = tuple(D / k for k in range(1, n + 1))
    U = tuple(math.ceil(t) for t in T)

    prefix = []
    h = 0.0
    for k in range(1, n + 1):
        h += 1.0 / k
        prefix.append(D * h)

    hp = _ceil_high_precision(n, B)
    mismatches = tuple(k for k in range(1, n + 1) if hp[k - 1] != U[k - 1])
    if mismatches:
        warnings.warn(
            f"threshold ceilings differ between binary64 and high precision at k={mismatches} "
            f"(n={n}, B={B}); using binary64",
            ThresholdPrecisionWarning,
            stacklevel=2,
        )

    values, lo, hi, level_of = [], [], [], []
    for k, uk in enumerate(U, start=1):
        if not values or uk != values[-1]:
            values.append(uk)
            lo.append(k)
            hi.append(k)
        else:
            hi[-1] = k
        level_of.append(len(values) - 1)

    return ThresholdTable(
        n=n, B=B, D=D, T=T, U=U, prefix_budget=tuple(prefix),
        level_value=tuple(values), level_lo=tuple(lo), level_hi=tuple(hi),
        level_of=tuple(level_of), precision_mismatches=mismatches,
    )


@dataclass
class OpCounters:
    """Operation counts for the current event plus running aggregates."""

    comparisons: int = 0
    increments: int = 0
    arrivals: int = 0
    arrival_max: int = 0
    arrival_total: int = 0
    drain_rounds: int = 0
    drain_max: int = 0
    drain_total: int = 0
    # max over rounds of ops / n
    drain_max_per_port: float = 0.0

    def reset(self):
        self.comparisons = 0
        self.increments = 0

    @property
    def current(self) -> int:
        return self.comparisons + self.increments

    def close_arrival(self):
        c = self.current
        self.arrivals += 1
        self.arrival_total += c
        if c > self.arrival_max:
            self.arrival_max = c
        self.reset()

    def close_drain(self, n: int):
        c = self.current
        self.drain_rounds += 1
        self.drain_total += c
        if c > self.drain_max:
            self.drain_max = c
        if c / n > self.drain_max_per_port:
            self.drain_max_per_port = c / n
        self.reset()

    def summary(self) -> dict:
        return {
            "arrivals": self.arrivals,
            "arrivalOpsMax": self.arrival_max,
            "arrivalOpsTotal": self.arrival_total,
            "drainRounds": self.drain_rounds,
            "drainOpsMax": self.drain_max,
            "drainOpsTotal": self.drain_total,
            "drainOpsMaxPerPort": self.drain_max_per_port,
        }


class HarmonicBookkeeping:
    """Per-port threshold index and at-or-above counts.

    ``level[i]`` is the deepest threshold level that port ``i + 1`` is still
    strictly below (``-1`` once it reaches ``U_1``); ``count[g]`` is the
    number of ports at or above level ``g``. Both change by at most one step
    per admitted or transmitted packet.
    """

    __slots__ = ("table", "level", "count")

    def __init__(self, table: ThresholdTable):
        self.table = table
        self.level = [table.levels - 1] * table.n
        self.count = [0] * table.levels

    def copy(self) -> "HarmonicBookkeeping":
        bk = HarmonicBookkeeping.__new__(HarmonicBookkeeping)
        bk.table = self.table
        bk.level = self.level[:]
        bk.count = self.count[:]
        return bk

    def q_index(self, port: int) -> int | None:
        g = self.level[port - 1]
        return None if g < 0 else self.table.level_hi[g]

    def at_or_above(self, k: int) -> int:
        return self.count[self.table.level_of[k - 1]]

    def q_indices(self) -> list[int | None]:
        return [self.q_index(p) for p in range(1, self.table.n + 1)]

    def at_or_above_all(self) -> list[int]:
        return [self.count[g] for g in self.table.level_of]

    def on_admit(self, port: int, new_occ: int, ops: OpCounters | None = None) -> None:
        g = self.level[port - 1]
        if g < 0:
            return
        crossed = new_occ >= self.table.level_value[g]
        if ops is not None:
            ops.comparisons += 1
        if crossed:
            self.count[g] += 1
            self.level[port - 1] = g - 1
            if ops is not None:
                ops.increments += 2

    def on_drain(self, ports: Sequence[int], occ: Sequence[int], ops: OpCounters | None = None) -> None:
        """Update after a transmission round; ``occ`` is the post-drain vector."""
        values = self.table.level_value
        last = self.table.levels - 1
        level = self.level
        count = self.count
        comps = incs = 0
        for port in ports:
            g = level[port - 1]
            comps += 1
            if g == last:
                continue
            nxt = g + 1
            comps += 1
            if occ[port - 1] < values[nxt]:
                count[nxt] -= 1
                level[port - 1] = nxt
                incs += 2
        if ops is not None:
            ops.comparisons += comps
            ops.increments += incs

    @staticmethod
    def from_scratch(table: ThresholdTable, occ: Sequence[int]) -> tuple[list[int | None], list[int]]:
        """Recompute ``(qIndex, atOrAbove)`` directly from the definitions."""
        q = []
        for o in occ:
            ks = [k for k, uk in enumerate(table.U, start=1) if o <= uk - 1]
            q.append(max(ks) if ks else None)
        above = [sum(1 for o in occ if o >= uk) for uk in table.U]
        return q, above

    def verify(self, occ: Sequence[int]) -> None:
        q, above = self.from_scratch(self.table, occ)
        if q != self.q_indices() or above != self.at_or_above_all():
            raise ConsistencyError(
                f"bookkeeping drifted: occ={list(occ)} qIndex={self.q_indices()} (expected {q}) "
                f"atOrAbove={self.at_or_above_all()} (expected {above})"
            )

    @classmethod
    def for_state(cls, table: ThresholdTable, occ: Sequence[int]) -> "HarmonicBookkeeping":
        bk = cls(table)
        for i, o in enumerate(occ):
            g = table.levels - 1
            while g >= 0 and o >= table.level_value[g]:
                bk.count[g] += 1
                g -= 1
            bk.level[i] = g
        return bk


# -- decision rules ---------------------------------------------------------


def harmonic_original_decide(table: ThresholdTable, state: BufferState, port: int) -> Decision:
    """Harmonic rule: after accepting, the i largest queues fit the i-th budget for all i."""
    occ = state.occ[:]
    occ[port - 1] += 1
    occ.sort(reverse=True)
    s = 0
    for i, (o, budget) in enumerate(zip(occ, table.prefix_budget), start=1):
        s += o
        if s > budget:
            return Decision(False, Cause.BUDGET, i)
    if state.total >= state.B:
        return Decision(False, Cause.GUARD, None)
    return ACCEPT


def modified_harmonic_decide(
    table: ThresholdTable,
    bk: HarmonicBookkeeping,
    state: BufferState,
    port: int,
    ops: OpCounters | None = None,
) -> Decision:
    """Single-threshold rule using integer thresholds and O(1) work.

    Finds k*, the largest k with ``occ < T_k``; accepts iff at most k*
    queues would be at or above ``T_k*`` afterwards and the buffer has room.
    """
    g = bk.level[port - 1]
    if g < 0:
        if ops is not None:
            ops.comparisons += 1
        return Decision(False, Cause.NONE_THRESHOLD, None)
    k = table.level_hi[g]
    after = bk.count[g]
    # occ + 1 >= U  <=>  occ >= U - 1
    crosses = state.occ[port - 1] >= table.level_value[g] - 1
    if crosses:
        after += 1
    ok = after <= k
    if ops is not None:
        ops.comparisons += 3
        ops.increments += crosses
    if not ok:
        return Decision(False, Cause.THRESHOLD, k)
    if ops is not None:
        ops.comparisons += 1
    if state.total >= state.B:
        return Decision(False, Cause.GUARD, k)
    return Decision(True, None, k)


def modified_harmonic_decide_real(table: ThresholdTable, state: BufferState, port: int) -> Decision:
    """Same rule evaluated naively against the real thresholds ``T_k``."""
    occ = state.occ
    k = table.q_index_scan(occ[port - 1])
    if k is None:
        return Decision(False, Cause.NONE_THRESHOLD, None)
    tk = table.T[k - 1]
    after = sum(1 for i, o in enumerate(occ) if (o + (i == port - 1)) >= tk)
    if after > k:
        return Decision(False, Cause.THRESHOLD, k)
    if state.total >= state.B:
        return Decision(False, Cause.GUARD, k)
    return Decision(True, None, k)


def dynamic_threshold_decide(alpha: float, state: BufferState, port: int) -> Decision:
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if not state.occ[port - 1] < alpha * (state.B - state.total):
        return Decision(False, Cause.RULE, None)
    if state.total >= state.B:
        return Decision(False, Cause.GUARD, None)
    return ACCEPT


def complete_sharing_decide(state: BufferState, port: int) -> Decision:
    return ACCEPT if state.total < state.B else Decision(False, Cause.GUARD, None)


def complete_partitioning_decide(state: BufferState, port: int) -> Decision:
    if not state.occ[port - 1] < state.B // state.n:
        return Decision(False, Cause.RULE, None)
    return ACCEPT


def smxq_decide(theta: int, state: BufferState, port: int) -> Decision:
    if not state.occ[port - 1] < theta:
        return Decision(False, Cause.RULE, None)
    if state.total >= state.B:
        return Decision(False, Cause.GUARD, None)
    return ACCEPT


# -- stateful policies ------------------------------------------------------


class Policy:
    """An online admission policy driving its own buffer.

    ``offer`` decides on one arrival and applies it; ``drain`` runs one
    transmission round. Subclasses implement ``decide`` (no mutation) and
    may hook ``_admitted`` / ``_drained`` to maintain extra state.
    """

    name = "policy"

    def __init__(self, config: SwitchConfig):
        self.config = config
        self.state = BufferState.empty(config)
        self.guard_triggers = 0
        self.ops = OpCounters()

    def get_params(self) -> dict:
        return {}

    def decide(self, port: int) -> Decision:
        raise NotImplementedError

    def offer(self, port: int) -> Decision:
        d = self.decide(port)
        if d.accept:
            self.state.admit(port)
            self._admitted(port)
        elif d.cause is Cause.GUARD:
            self.guard_triggers += 1
        return d

    def drain(self) -> list[int]:
        sent = self.state.drain()
        self._drained(sent)
        return sent

    def _admitted(self, port: int) -> None:
        pass

    def _drained(self, ports: list[int]) -> None:
        pass

    def describe(self) -> dict:
        return {"name": self.name, **self.get_params()}


class ModifiedHarmonic(Policy):
    name = "modified-harmonic"

    def __init__(self, config: SwitchConfig, table: ThresholdTable | None = None, check: bool = False):
        super().__init__(config)
        self.table = table or build_thresholds(config)
        self.bk = HarmonicBookkeeping(self.table)
        self.check = check

    def decide(self, port):
        return modified_harmonic_decide(self.table, self.bk, self.state, port, self.ops)

    def offer(self, port):
        d = super().offer(port)
        self.ops.close_arrival()
        return d

    def _admitted(self, port):
        self.bk.on_admit(port, self.state.occ[port - 1], self.ops)
        if self.check:
            self.bk.verify(self.state.occ)

    def _drained(self, ports):
        self.bk.on_drain(ports, self.state.occ, self.ops)
        self.ops.close_drain(self.config.n)
        if self.check:
            self.bk.verify(self.state.occ)

    def copy(self) -> "ModifiedHarmonic":
        other = ModifiedHarmonic.__new__(ModifiedHarmonic)
        other.config = self.config
        other.table = self.table
        other.state = self.state.copy()
        other.bk = self.bk.copy()
        other.guard_triggers = self.guard_triggers
        other.ops = OpCounters()
        other.check = self.check
        return other


class Harmonic(Policy):
    name = "harmonic"

    def __init__(self, config: SwitchConfig, table: ThresholdTable | None = None):
        super().__init__(config)
        self.table = table or build_thresholds(config)

    def decide(self, port):
        return harmonic_original_decide(self.table, self.state, port)


class DynamicThreshold(Policy):
    name = "dt"

    def __init__(self, config: SwitchConfig, alpha: float = 1.0):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        super().__init__(config)
        self.alpha = alpha

    def get_params(self):
        return {"alpha": self.alpha}

    def decide(self, port):
        return dynamic_threshold_decide(self.alpha, self.state, port)


class CompleteSharing(Policy):
    name = "sharing"

    def decide(self, port):
        return complete_sharing_decide(self.state, port)


class CompletePartitioning(Policy):
    name = "partitioning"

    def decide(self, port):
        return complete_partitioning_decide(self.state, port)


def default_smxq_theta(config: SwitchConfig) -> int:
    return math.ceil(config.B / math.sqrt(config.n))


class SMXQ(Policy):
    name = "smxq"

    def __init__(self, config: SwitchConfig, theta: int | None = None):
        super().__init__(config)
        self.theta = default_smxq_theta(config) if theta is None else int(theta)
        if self.theta < 0:
            raise ValueError("theta must be nonnegative")

    def get_params(self):
        return {"theta": self.theta}

    def decide(self, port):
        return smxq_decide(self.theta, self.state, port)


POLICIES = {
    "harmonic": Harmonic,
    "modified-harmonic": ModifiedHarmonic,
    "dt": DynamicThreshold,
    "sharing": CompleteSharing,
    "partitioning": CompletePartitioning,
    "smxq": SMXQ,
}


def make_policy(name: str, config: SwitchConfig, alpha: float | None = None, theta: int | None = None) -> Policy:
    try:
        cls = POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}") from None
    if cls is DynamicThreshold:
        return cls(config, alpha=1.0 if alpha is None else alpha)
    if cls is SMXQ:
        return cls(config, theta=theta)
    return cls(config)

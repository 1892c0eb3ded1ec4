"""Slotted simulation engine.

For slot ``s = 0, 1, ...`` every nonempty port first transmits one packet
(skipped at ``s = 0``), then the slot's arrivals are offered in order.
After the last arrival slot the buffer drains until empty, so throughput
equals the number of accepted packets.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterator, Sequence

from .core import InvalidTrace, SwitchConfig, Trace, validate_trace
from .policies import (
    Cause,
    Decision,
    Harmonic,
    ModifiedHarmonic,
    Policy,
    harmonic_original_decide,
    make_policy,
)

TIMELINE_HEADER = ("event", "slot", "phase", "port", "occ_before", "decision", "cause")


@dataclass
class TimelineRow:
    event: int
    slot: int
    phase: str
    port: int
    occ_before: int
    decision: str
    cause: str = ""


@dataclass
class Infeasibility:
    packet: int
    slot: int
    port: int
    total: int

    def to_dict(self):
        return {"packet": self.packet, "slot": self.slot, "port": self.port, "total": self.total}


@dataclass
class SimResult:
    config: SwitchConfig
    policy: dict
    decisions: list[Decision]
    guard_triggers: int = 0
    counters: dict = field(default_factory=dict)
    timeline: list[TimelineRow] | None = None
    infeasible: Infeasibility | None = None
    # Buffer occupancy right after every event (arrival or transmission round).
    occupancy: list[tuple[int, ...]] | None = None
    # Buffer occupancy seen by each arriving packet, indexed by packet id.
    pre_arrival: list[tuple[int, ...]] | None = None

    @property
    def accepted(self) -> set[int]:
        return {i for i, d in enumerate(self.decisions) if d.accept}

    @property
    def rejected(self) -> dict[int, Decision]:
        return {i: d for i, d in enumerate(self.decisions) if not d.accept}

    @property
    def throughput(self) -> int:
        return sum(1 for d in self.decisions if d.accept)

    @property
    def vector(self) -> list[bool]:
        return [d.accept for d in self.decisions]

    @property
    def feasible(self) -> bool:
        return self.infeasible is None

    def rejection_causes(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for d in self.decisions:
            if not d.accept:
                out[d.cause.value] = out.get(d.cause.value, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "policy": self.policy,
            "throughput": self.throughput,
            "guardTriggers": self.guard_triggers,
            "rejectionCauses": self.rejection_causes(),
            "counters": self.counters,
            "feasible": self.feasible,
            "infeasible": self.infeasible.to_dict() if self.infeasible else None,
            "decisions": [
                {"id": i, "accepted": d.accept, "cause": d.cause.value if d.cause else None, "k": d.k}
                for i, d in enumerate(self.decisions)
            ],
        }

    def timeline_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TIMELINE_HEADER)
        for r in self.timeline or ():
            w.writerow([r.event, r.slot, r.phase, r.port, r.occ_before, r.decision, r.cause])
        return buf.getvalue()


class VectorPolicy(Policy):
    """Replays fixed accept/reject decisions in packet-id order."""

    name = "vector"

    def __init__(self, config: SwitchConfig, vector: Sequence[bool]):
        super().__init__(config)
        self.vector = [bool(v) for v in vector]
        self.cursor = 0

    def decide(self, port):
        want = self.vector[self.cursor]
        if not want:
            return Decision(False, Cause.RULE, None)
        if self.state.total >= self.state.B:
            return Decision(False, Cause.GUARD, None)
        return Decision(True)

    def offer(self, port):
        d = super().offer(port)
        self.cursor += 1
        return d


def _slots(trace: Trace):
    return [(s, list(g)) for s, g in groupby(trace.packets, key=lambda p: p.slot)]


def iter_events(trace: Trace, buffers) -> Iterator[tuple]:
    """Yield ``("drain", slot, None)`` and ``("arrival", slot, packet)`` events.

    ``buffers`` is a callable returning True while any simulated buffer is
    nonempty; it decides when idle stretches can be skipped and when the
    final drain is complete.
    """
    slot = 0
    for s, pkts in _slots(trace):
        while slot < s:
            slot += 1
            if buffers():
                yield ("drain", slot, None)
            else:
                slot = s
        for p in pkts:
            yield ("arrival", slot, p)
    while buffers():
        slot += 1
        yield ("drain", slot, None)


def _check(trace: Trace, config: SwitchConfig | None) -> SwitchConfig:
    config = config or trace.config
    trace = trace.with_config(config)
    report = validate_trace(trace)
    if not report.ok:
        raise InvalidTrace("; ".join(report.violations))
    return config


def simulate(
    trace: Trace,
    policy: Policy | str = "modified-harmonic",
    config: SwitchConfig | None = None,
    *,
    record_timeline: bool = False,
    record_occupancy: bool = False,
    alpha: float | None = None,
    theta: int | None = None,
) -> SimResult:
    config = _check(trace, config)
    if isinstance(policy, str):
        policy = make_policy(policy, config, alpha=alpha, theta=theta)
    state = policy.state
    decisions: list[Decision] = []
    timeline = [] if record_timeline else None
    occupancy = [] if record_occupancy else None
    pre_arrival = [] if record_occupancy else None
    infeasible = None
    event = 0

    for kind, slot, pkt in iter_events(trace, lambda: state.total > 0):
        if kind == "drain":
            before = state.occ[:] if timeline is not None else None
            sent = policy.drain()
            if timeline is not None:
                for port in sent:
                    timeline.append(TimelineRow(event, slot, "TRANSMIT", port, before[port - 1], "transmit"))
        else:
            occ_before = state.occ[pkt.port - 1]
            if pre_arrival is not None:
                pre_arrival.append(tuple(state.occ))
            d = policy.offer(pkt.port)
            decisions.append(d)
            if isinstance(policy, VectorPolicy) and infeasible is None and not d.accept and d.cause is Cause.GUARD:
                infeasible = Infeasibility(pkt.id, slot, pkt.port, state.total)
                break
            if timeline is not None:
                timeline.append(TimelineRow(
                    event, slot, "ARRIVALS", pkt.port, occ_before,
                    "accept" if d.accept else "reject",
                    "" if d.accept else d.cause.value,
                ))
        if occupancy is not None:
            occupancy.append(tuple(state.occ))
        event += 1

    return SimResult(
        config=config,
        policy=policy.describe(),
        decisions=decisions,
        guard_triggers=policy.guard_triggers,
        counters=policy.ops.summary(),
        timeline=timeline,
        infeasible=infeasible,
        occupancy=occupancy,
        pre_arrival=pre_arrival,
    )


def replay_acceptance(trace: Trace, vector: Sequence[bool], config: SwitchConfig | None = None, **kw) -> SimResult:
    """Simulate fixed decisions; ``result.infeasible`` names the first overflow."""
    config = config or trace.config
    if len(vector) != len(trace):
        raise ValueError(f"acceptance vector has {len(vector)} entries for {len(trace)} packets")
    return simulate(trace, VectorPolicy(config, vector), config, **kw)


class InfeasibleVector(ValueError):
    pass


@dataclass
class LockstepEvent:
    index: int
    kind: str  # "arrival" | "drain"
    slot: int
    packet: int | None = None
    port: int | None = None
    occ_a: int | None = None  # pre-arrival occupancy of the arriving port
    occ_b: int | None = None
    decision_a: Decision | None = None
    accept_b: bool | None = None
    fifo_a: tuple[tuple[int, ...], ...] | None = None  # pre-event FIFO contents
    fifo_b: tuple[tuple[int, ...], ...] | None = None
    sent_a: tuple[int, ...] = ()
    sent_b: tuple[int, ...] = ()


@dataclass
class LockstepResult:
    config: SwitchConfig
    a: SimResult
    b: SimResult
    events: list[LockstepEvent]

    @property
    def arrivals(self) -> list[LockstepEvent]:
        return [e for e in self.events if e.kind == "arrival"]


def simulate_lockstep(
    trace: Trace,
    policy_a: Policy | str,
    vector_b: Sequence[bool],
    config: SwitchConfig | None = None,
    *,
    snapshots: bool = True,
) -> LockstepResult:
    """Run a policy and a fixed decision vector under one clock.

    Both buffers keep packet identities in per-port FIFOs. Raises
    ``InfeasibleVector`` if ``vector_b`` would overflow the buffer.
    """
    config = _check(trace, config)
    if isinstance(policy_a, str):
        policy_a = make_policy(policy_a, config)
    if len(vector_b) != len(trace):
        raise ValueError("acceptance vector length must equal trace length")
    pol_b = VectorPolicy(config, vector_b)
    sa, sb = policy_a.state, pol_b.state
    fifo_a = [deque() for _ in range(config.n)]
    fifo_b = [deque() for _ in range(config.n)]
    dec_a: list[Decision] = []
    dec_b: list[Decision] = []
    events: list[LockstepEvent] = []

    def snap(f):
        return tuple(tuple(q) for q in f) if snapshots else None

    for kind, slot, pkt in iter_events(trace, lambda: sa.total > 0 or sb.total > 0):
        ev = LockstepEvent(len(events), kind, slot, fifo_a=snap(fifo_a), fifo_b=snap(fifo_b))
        if kind == "drain":
            ev.sent_a = tuple(policy_a.drain())
            ev.sent_b = tuple(pol_b.drain())
            for p in ev.sent_a:
                fifo_a[p - 1].popleft()
            for p in ev.sent_b:
                fifo_b[p - 1].popleft()
        else:
            q = pkt.port
            ev.packet, ev.port = pkt.id, q
            ev.occ_a, ev.occ_b = sa.occ[q - 1], sb.occ[q - 1]
            da = policy_a.offer(q)
            db = pol_b.offer(q)
            if vector_b[pkt.id] and not db.accept:
                raise InfeasibleVector(f"vector overflows the buffer at packet {pkt.id} (slot {slot})")
            if da.accept:
                fifo_a[q - 1].append(pkt.id)
            if db.accept:
                fifo_b[q - 1].append(pkt.id)
            ev.decision_a, ev.accept_b = da, db.accept
            dec_a.append(da)
            dec_b.append(db)
        events.append(ev)

    ra = SimResult(config, policy_a.describe(), dec_a, policy_a.guard_triggers, policy_a.ops.summary())
    rb = SimResult(config, pol_b.describe(), dec_b, pol_b.guard_triggers, pol_b.ops.summary())
    return LockstepResult(config, ra, rb, events)


@dataclass
class DifferentialReport:
    agree: bool
    first_divergence: dict | None
    harmonic: SimResult
    modified: SimResult
    # Points on Modified Harmonic's own trajectory where the Harmonic rule,
    # evaluated on the same state, would decide differently.
    rule_disagreements: list[dict]

    def to_dict(self) -> dict:
        return {
            "agree": self.agree,
            "firstDivergence": self.first_divergence,
            "harmonicThroughput": self.harmonic.throughput,
            "modifiedThroughput": self.modified.throughput,
            "harmonicGuardTriggers": self.harmonic.guard_triggers,
            "modifiedGuardTriggers": self.modified.guard_triggers,
            "ruleDisagreements": self.rule_disagreements,
        }


def _dec(d: Decision) -> dict:
    return {"accept": d.accept, "cause": d.cause.value if d.cause else None, "k": d.k}


def differential(trace: Trace, config: SwitchConfig | None = None) -> DifferentialReport:
    """Compare the prefix-budget Harmonic rule with the single-threshold rule."""
    config = _check(trace, config)
    har = simulate(trace, Harmonic(config), config, record_occupancy=True)
    mod_policy = ModifiedHarmonic(config)
    mod = simulate(trace, mod_policy, config, record_occupancy=True)

    first = None
    for pkt, dh, dm in zip(trace.packets, har.decisions, mod.decisions):
        if dh.accept != dm.accept:
            first = {"packet": pkt.id, "slot": pkt.slot, "port": pkt.port,
                     "harmonic": _dec(dh), "modified": _dec(dm)}
            break
    if first is not None:
        first["harmonicOcc"] = list(har.pre_arrival[first["packet"]])
        first["modifiedOcc"] = list(mod.pre_arrival[first["packet"]])

    disagreements = []
    table = mod_policy.table
    replay = ModifiedHarmonic(config, table)
    for kind, slot, pkt in iter_events(trace, lambda: replay.state.total > 0):
        if kind == "drain":
            replay.drain()
            continue
        dh = harmonic_original_decide(table, replay.state, pkt.port)
        occ = list(replay.state.occ)
        dm = replay.offer(pkt.port)
        rule_h = dh.accept or dh.cause is Cause.GUARD
        rule_m = dm.accept or dm.cause is Cause.GUARD
        if dh.accept != dm.accept or rule_h != rule_m:
            disagreements.append({"packet": pkt.id, "slot": slot, "port": pkt.port, "occ": occ,
                                  "harmonic": _dec(dh), "modified": _dec(dm)})

    return DifferentialReport(first is None, first, har, mod, disagreements)

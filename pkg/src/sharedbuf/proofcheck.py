"""Replay the competitiveness argument for Modified Harmonic on a concrete trace.

Given HAR (the packets Modified Harmonic accepts) and a feasible OPT vector,
the checker

* splits OPT into A = OPT & HAR, B = OPT - HAR packets whose queue was
  strictly longer in HAR than in OPT when they arrived, and C = the rest;
* maps A to itself and each B packet to an unmapped HAR packet of the same
  port, tracking the surplus ``g(q) = max(occ_HAR(q) - occ_OPT(q), 0)``
  against ``u(q)``, the number of unmapped HAR packets in queue q;
* matches each C packet to a HAR-buffered packet that leaves earlier and
  has fewer than ``cap`` matches so far;
* checks ``|HAR| >= |A| + |B|``, ``(1 + ln n)|HAR| >= |C|`` and
  ``(2 + ln n)|HAR| >= |OPT|``.

Failures are recorded, never raised: the checker is an empirical test of
each construction, not an assertion that they must succeed.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Sequence

from .core import SwitchConfig, Trace
from .oracle import BudgetExhausted, OptLimits, offline_opt
from .policies import Cause, ModifiedHarmonic, ThresholdTable, build_thresholds
from .simulator import LockstepResult, simulate, simulate_lockstep

STRATEGIES = ("most-recent", "earliest")
POOLS = ("buffered", "arrived")

# Proof case labels for arrivals, in the order the induction lists them.
CASE_B, CASE_A, CASE_C, CASE_HAR_ONLY, CASE_NEITHER = "B", "A", "C", "HAR-only", "neither"
DRAIN = "drain"


def match_cap(n: int) -> int:
    """Largest integer strictly below ``1 + ln n``."""
    x = 1.0 + math.log(n)
    c = math.ceil(x) - 1
    return max(c, 0)


@dataclass
class Partition:
    A: set[int]
    B: set[int]
    C: set[int]
    har: set[int]
    opt: set[int]

    def well_formed(self) -> bool:
        disjoint = not (self.A & self.B or self.A & self.C or self.B & self.C)
        return disjoint and (self.A | self.B | self.C) == self.opt and self.A == self.opt & self.har

    def case_of(self, pid: int) -> str:
        if pid in self.B:
            return CASE_B
        if pid in self.A:
            return CASE_A
        if pid in self.C:
            return CASE_C
        if pid in self.har:
            return CASE_HAR_ONLY
        return CASE_NEITHER


def partition_opt(lockstep: LockstepResult) -> Partition:
    har, opt = set(), set()
    A, B, C = set(), set(), set()
    for ev in lockstep.arrivals:
        p = ev.packet
        if ev.decision_a.accept:
            har.add(p)
        if not ev.accept_b:
            continue
        opt.add(p)
        if ev.decision_a.accept:
            A.add(p)
        elif ev.occ_a > ev.occ_b:
            B.add(p)
        else:
            C.add(p)
    return Partition(A, B, C, har, opt)


def _replay(lockstep: LockstepResult):
    """Yield ``(event, har_fifo, opt_fifo)`` with FIFOs in their pre-event state.

    The caller sees the live deques; they are advanced after each yield.
    """
    n = lockstep.config.n
    har = [deque() for _ in range(n)]
    opt = [deque() for _ in range(n)]
    for ev in lockstep.events:
        if ev.fifo_a is not None:
            assert tuple(tuple(q) for q in har) == ev.fifo_a, f"HAR FIFO drift at event {ev.index}"
            assert tuple(tuple(q) for q in opt) == ev.fifo_b, f"OPT FIFO drift at event {ev.index}"
        yield ev, har, opt
        if ev.kind == "drain":
            for p in ev.sent_a:
                har[p - 1].popleft()
            for p in ev.sent_b:
                opt[p - 1].popleft()
        else:
            if ev.decision_a.accept:
                har[ev.port - 1].append(ev.packet)
            if ev.accept_b:
                opt[ev.port - 1].append(ev.packet)


@dataclass
class SubmappingRun:
    mapping: dict[int, int]
    # event index at which each HAR packet received its antecedent
    mapped_at: dict[int, int]
    violations: list[dict]
    strategy: str
    pool: str
    # B packets served only because transmitted HAR packets were eligible
    fallback_to_transmitted: int = 0


def build_submappings(
    lockstep: LockstepResult,
    partition: Partition,
    strategy: str = "most-recent",
    pool: str = "buffered",
) -> SubmappingRun:
    """Map A to itself and each B packet to an unmapped HAR packet of its port.

    ``pool="buffered"`` only considers HAR packets still in the buffer;
    ``pool="arrived"`` also allows ones already transmitted.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    if pool not in POOLS:
        raise ValueError(f"pool must be one of {POOLS}")
    n = lockstep.config.n
    mapping: dict[int, int] = {}
    mapped_at: dict[int, int] = {}
    violations = []
    arrived = [[] for _ in range(n)]
    fallback = 0

    for ev, har, opt in _replay(lockstep):
        if ev.kind != "arrival":
            continue
        p, q = ev.packet, ev.port
        if p in partition.A:
            mapping[p] = p
            mapped_at[p] = ev.index
        elif p in partition.B:
            cands = [h for h in har[q - 1] if h not in mapped_at]
            if not cands and pool == "arrived":
                cands = [h for h in arrived[q - 1] if h not in mapped_at]
                fallback += bool(cands)
            if cands:
                h = cands[-1] if strategy == "most-recent" else cands[0]
                mapping[p] = h
                mapped_at[h] = ev.index
            else:
                violations.append({
                    "event": ev.index, "packet": p, "port": q, "slot": ev.slot,
                    "occHar": ev.occ_a, "occOpt": ev.occ_b,
                    "g": max(ev.occ_a - ev.occ_b, 0),
                    "uBuffered": 0,
                    "uArrived": sum(1 for h in arrived[q - 1] if h not in mapped_at),
                })
        if ev.decision_a.accept:
            arrived[q - 1].append(p)
    return SubmappingRun(mapping, mapped_at, violations, strategy, pool, fallback)


@dataclass
class GUReport:
    """Per-event comparison of the HAR surplus g(q) with unmapped count u(q).

    ``mismatches`` lists every (event, port) where they differ after the
    event. ``introduced`` marks those where they were equal before it,
    i.e. where that event broke the equality.
    """

    mismatches: list[dict] = field(default_factory=list)
    events_checked: int = 0
    # Same comparison with u counting every arrived unmapped HAR packet.
    arrived_below_g: list[dict] = field(default_factory=list)

    def _count(self, arrival: bool, introduced_only: bool) -> int:
        evs = {
            m["event"] for m in self.mismatches
            if (m["kind"] != DRAIN) == arrival and (m["introduced"] or not introduced_only)
        }
        return len(evs)

    @property
    def arrival_mismatches(self) -> int:
        return self._count(True, False)

    @property
    def arrival_induction_failures(self) -> int:
        return self._count(True, True)

    @property
    def drain_mismatches(self) -> int:
        return self._count(False, False)

    @property
    def drain_induced(self) -> int:
        return self._count(False, True)

    def by_case(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for m in self.mismatches:
            if m["introduced"]:
                out[m["kind"]] += 1
        return dict(out)


def check_g_equals_u(lockstep: LockstepResult, partition: Partition, run: SubmappingRun) -> GUReport:
    n = lockstep.config.n
    report = GUReport()
    mapped_at = run.mapped_at
    inf = float("inf")
    unmapped_arrived = [0] * n
    prev_g = [0] * n
    prev_u = [0] * n
    for ev, har, opt in _replay(lockstep):
        # advance to post-event contents without touching the live deques
        if ev.kind == "drain":
            kind = DRAIN
            post_har = [list(h) for h in har]
            post_opt = [len(o) for o in opt]
            for p in ev.sent_a:
                post_har[p - 1].pop(0)
            for p in ev.sent_b:
                post_opt[p - 1] -= 1
            ports = range(n)
        else:
            kind = partition.case_of(ev.packet)
            q = ev.port - 1
            post_har = [list(h) for h in har]
            post_opt = [len(o) for o in opt]
            if ev.decision_a.accept:
                post_har[q].append(ev.packet)
                if mapped_at.get(ev.packet, inf) > ev.index:
                    unmapped_arrived[q] += 1
            if ev.accept_b:
                post_opt[q] += 1
            if ev.packet in partition.B and ev.packet in run.mapping:
                # the mapping consumed an unmapped HAR packet of this port
                unmapped_arrived[q] -= 1
            ports = range(n)
        report.events_checked += 1
        for i in ports:
            g = max(len(post_har[i]) - post_opt[i], 0)
            u = sum(1 for h in post_har[i] if mapped_at.get(h, inf) > ev.index)
            if g != u:
                report.mismatches.append({
                    "event": ev.index, "slot": ev.slot, "kind": kind, "port": i + 1,
                    "packet": ev.packet, "g": g, "u": u,
                    "introduced": prev_g[i] == prev_u[i],
                })
            if unmapped_arrived[i] < g:
                report.arrived_below_g.append({
                    "event": ev.index, "kind": kind, "port": i + 1, "g": g, "uArrived": unmapped_arrived[i],
                })
            prev_g[i], prev_u[i] = g, u
    return report


@dataclass
class MatchingRun:
    matching: dict[int, int]
    match_count: dict[int, int]
    cap: int
    violations: list[dict]
    mate_violations: list[dict]


def build_matching(
    lockstep: LockstepResult,
    partition: Partition,
    table: ThresholdTable | None = None,
    cap: int | None = None,
) -> MatchingRun:
    """Match every C packet to a HAR-buffered packet that drains strictly earlier.

    Candidates on every port qualify if their FIFO position is below the C
    packet's position in OPT's queue and they hold fewer than ``cap``
    matches. Preference: earliest drain, then fewest matches, then lowest id.
    """
    config = lockstep.config
    table = table or build_thresholds(config)
    cap = match_cap(config.n) if cap is None else cap
    match_count: dict[int, int] = defaultdict(int)
    mates: dict[int, list[int]] = defaultdict(list)
    matching: dict[int, int] = {}
    violations = []
    mate_violations = []

    for ev, har, opt in _replay(lockstep):
        if ev.kind != "arrival" or ev.packet not in partition.C:
            continue
        p, q = ev.packet, ev.port
        pos_p = len(opt[q - 1]) + 1
        best = None
        for fifo in har:
            for pos, h in enumerate(fifo, start=1):
                if pos >= pos_p:
                    break
                c = match_count[h]
                if c < cap:
                    key = (pos, c, h)
                    if best is None or key < best:
                        best = key
        if best is None:
            d = ev.decision_a
            k = d.k if d.cause is Cause.THRESHOLD else (1 if d.cause is Cause.NONE_THRESHOLD else None)
            uk = table.u(k) if k is not None else None
            low = [h for fifo in har for pos, h in enumerate(fifo, start=1) if uk is not None and pos <= uk]
            violations.append({
                "event": ev.index, "packet": p, "port": q, "slot": ev.slot,
                "harCause": d.cause.value if d.cause else None, "k": k, "Uk": uk,
                "optPosition": pos_p,
                "harBufferedAtPosLeUk": len(low),
                "saturatedAtPosLeUk": sum(1 for h in low if match_count[h] >= cap),
                "kTimesUk": k * uk if k is not None else None,
                "harTotal": sum(len(f) for f in har), "optTotal": sum(len(f) for f in opt),
                "cap": cap,
            })
            continue
        h = best[2]
        opt_now = {x for f in opt for x in f}
        for fifo in har:
            for x in fifo:
                stale = [c for c in mates.get(x, ()) if c not in opt_now]
                if stale:
                    mate_violations.append({"event": ev.index, "har": x, "mates": stale})
        matching[p] = h
        match_count[h] += 1
        mates[h].append(p)
    return MatchingRun(matching, dict(match_count), cap, violations, mate_violations)


@dataclass
class Verdict:
    name: str
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs >= self.rhs - 1e-9

    @property
    def slack(self) -> float:
        return self.lhs - self.rhs

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, "slack": self.slack}


@dataclass
class ProofLedger:
    config: SwitchConfig
    opt_source: str
    partition: Partition
    submapping: SubmappingRun
    gu: GUReport
    matching: MatchingRun
    guard_triggers: int
    har_causes: dict
    lockstep: LockstepResult | None = None
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def A(self):
        return self.partition.A

    @property
    def B(self):
        return self.partition.B

    @property
    def C(self):
        return self.partition.C

    @property
    def cap(self):
        return self.matching.cap

    @property
    def bounds_hold(self) -> bool:
        return all(v.holds for v in self.verdicts)

    @property
    def clean(self) -> bool:
        """No failure in any construction the proof relies on at arrivals."""
        return (
            self.partition.well_formed()
            and not self.submapping.violations
            and self.gu.arrival_induction_failures == 0
            and not self.matching.violations
            and not self.matching.mate_violations
            and self.bounds_hold
        )

    def summary(self) -> dict:
        p = self.partition
        return {
            "config": self.config.to_dict(),
            "optSource": self.opt_source,
            "har": len(p.har), "opt": len(p.opt),
            "A": len(p.A), "B": len(p.B), "C": len(p.C),
            "partitionWellFormed": p.well_formed(),
            "strategy": self.submapping.strategy,
            "pool": self.submapping.pool,
            "submappingViolations": len(self.submapping.violations),
            "submappingFallbacks": self.submapping.fallback_to_transmitted,
            "guArrivalMismatches": self.gu.arrival_mismatches,
            "guArrivalInductionFailures": self.gu.arrival_induction_failures,
            "guDrainMismatches": self.gu.drain_mismatches,
            "guDrainInduced": self.gu.drain_induced,
            "guInducedByCase": self.gu.by_case(),
            "guArrivedBelowG": len(self.gu.arrived_below_g),
            "cap": self.cap,
            "matchingViolations": len(self.matching.violations),
            "mateViolations": len(self.matching.mate_violations),
            "maxMatchCount": max(self.matching.match_count.values(), default=0),
            "guardTriggers": self.guard_triggers,
            "harRejectionCauses": self.har_causes,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "boundsHold": self.bounds_hold,
        }

    def to_dict(self, detail: bool = True) -> dict:
        d = self.summary()
        if detail:
            p = self.partition
            d["sets"] = {k: sorted(getattr(p, k)) for k in ("A", "B", "C")}
            d["mapping"] = {str(k): v for k, v in sorted(self.submapping.mapping.items())}
            d["matching"] = {str(k): v for k, v in sorted(self.matching.matching.items())}
            d["submappingViolationRecords"] = self.submapping.violations
            d["matchingViolationRecords"] = self.matching.violations
            d["mateViolationRecords"] = self.matching.mate_violations
            d["guMismatchRecords"] = self.gu.mismatches
        return d

    def event_dump_csv(self) -> str:
        """One row per event with both buffers, the case label and g/u."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["event", "slot", "kind", "packet", "port", "occ_har", "occ_opt",
                    "har_accept", "har_cause", "har_k", "opt_accept", "mapped_to", "matched_to",
                    "har_fifo", "opt_fifo", "gu_mismatch_ports"])
        mm = defaultdict(list)
        for m in self.gu.mismatches:
            mm[m["event"]].append(f"{m['port']}:g={m['g']},u={m['u']}")
        for ev in (self.lockstep.events if self.lockstep else ()):
            fa = "|".join(" ".join(map(str, q)) for q in ev.fifo_a) if ev.fifo_a is not None else ""
            fb = "|".join(" ".join(map(str, q)) for q in ev.fifo_b) if ev.fifo_b is not None else ""
            if ev.kind == "drain":
                w.writerow([ev.index, ev.slot, DRAIN, "", "", "", "", "", "", "", "", "", "", fa, fb,
                            ";".join(mm.get(ev.index, []))])
                continue
            d = ev.decision_a
            w.writerow([
                ev.index, ev.slot, self.partition.case_of(ev.packet), ev.packet, ev.port, ev.occ_a, ev.occ_b,
                int(d.accept), d.cause.value if d.cause else "", "" if d.k is None else d.k, int(ev.accept_b),
                self.submapping.mapping.get(ev.packet, ""), self.matching.matching.get(ev.packet, ""),
                fa, fb, ";".join(mm.get(ev.index, [])),
            ])
        return buf.getvalue()


def verify_bounds(ledger: ProofLedger) -> list[Verdict]:
    p = ledger.partition
    n = ledger.config.n
    har = len(p.har)
    ln = math.log(n)
    ledger.verdicts = [
        Verdict("|HAR| >= |A| + |B|", har, len(p.A) + len(p.B)),
        Verdict("(1 + ln n)|HAR| >= |C|", (1 + ln) * har, len(p.C)),
        Verdict("(2 + ln n)|HAR| >= |OPT|", (2 + ln) * har, len(p.opt)),
    ]
    return ledger.verdicts


HEURISTIC_POLICIES = (("sharing", {}), ("dt", {"alpha": 1.0}), ("dt", {"alpha": 2.0}),
                      ("smxq", {}), ("partitioning", {}), ("harmonic", {}))


def heuristic_opt_vector(trace: Trace, config: SwitchConfig | None = None) -> tuple[list[bool], str]:
    """Highest-throughput feasible vector among the baseline policies."""
    config = config or trace.config
    best = None
    for name, params in HEURISTIC_POLICIES:
        r = simulate(trace, name, config, **params)
        label = name + "".join(f":{k}={v}" for k, v in params.items())
        if best is None or r.throughput > best[0]:
            best = (r.throughput, r.vector, label)
    return best[1], "heuristic:" + best[2]


def check_proof(
    trace: Trace,
    config: SwitchConfig | None = None,
    opt_vector: Sequence[bool] | None = None,
    *,
    limits: OptLimits = OptLimits(),
    strategy: str = "most-recent",
    pool: str = "buffered",
    fallback_heuristic: bool = False,
    keep_lockstep: bool = True,
) -> ProofLedger:
    """Run every construction of the argument on one trace.

    Without ``opt_vector`` the oracle's optimal vector is used; if the
    oracle runs out of budget and ``fallback_heuristic`` is set, the best
    baseline vector stands in for OPT.
    """
    config = config or trace.config
    if opt_vector is None:
        try:
            res = offline_opt(trace, config, limits)
            opt_vector, source = res.opt_vector, "oracle"
        except BudgetExhausted:
            if not fallback_heuristic:
                raise
            opt_vector, source = heuristic_opt_vector(trace, config)
    else:
        source = "given"
    policy = ModifiedHarmonic(config)
    lock = simulate_lockstep(trace, policy, opt_vector, config)
    part = partition_opt(lock)
    sub = build_submappings(lock, part, strategy, pool)
    gu = check_g_equals_u(lock, part, sub)
    match = build_matching(lock, part, policy.table)
    ledger = ProofLedger(
        config=config, opt_source=source, partition=part, submapping=sub, gu=gu, matching=match,
        guard_triggers=lock.a.guard_triggers, har_causes=lock.a.rejection_causes(),
        lockstep=lock if keep_lockstep else None,
    )
    verify_bounds(ledger)
    return ledger


__all__ = [
    "Partition", "partition_opt", "build_submappings", "check_g_equals_u", "build_matching",
    "verify_bounds", "check_proof", "ProofLedger", "match_cap", "heuristic_opt_vector",
]

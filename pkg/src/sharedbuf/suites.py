"""Batch experiments: exhaustive bound checks, the seeded random suite, flood family."""

from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .core import SwitchConfig, Trace
from .oracle import (
    BudgetExhausted,
    OptLimits,
    competitive_bound,
    offline_opt,
    opt_count_frontier,
    opt_upper_bound,
    ratio,
)
from .policies import ModifiedHarmonic, make_policy
from .simulator import simulate
from .tracegen import GenSpec, generate


@dataclass
class ExhaustiveReport:
    n: int
    B: int
    max_slots: int
    max_packets: int
    traces: int = 0
    worst_ratio: float = 1.0
    worst_trace: list = field(default_factory=list)
    violations: list[dict] = field(default_factory=list)

    @property
    def bound(self) -> float:
        return competitive_bound(self.n)

    def to_dict(self) -> dict:
        return {
            "n": self.n, "B": self.B, "maxSlots": self.max_slots, "maxPackets": self.max_packets,
            "traces": self.traces, "bound": self.bound, "worstRatio": self.worst_ratio,
            "worstTrace": self.worst_trace, "violations": self.violations,
        }


def _frontier_step(frontier: dict, q: int, B: int) -> dict:
    nxt = dict(frontier)
    for occ, c in frontier.items():
        if sum(occ) < B:
            a = occ[:q] + (occ[q] + 1,) + occ[q + 1:]
            if nxt.get(a, -1) < c + 1:
                nxt[a] = c + 1
    return nxt


def _frontier_drain(frontier: dict, rounds: int) -> dict:
    out: dict = {}
    for occ, c in frontier.items():
        d = tuple(o - rounds if o > rounds else 0 for o in occ)
        if out.get(d, -1) < c:
            out[d] = c
    return out


def exhaustive_bound_check(n: int, B: int, max_slots: int, max_packets: int) -> ExhaustiveReport:
    """Check ``|OPT| <= (2 + ln n)|HAR|`` on every trace in the box.

    Traces are visited as a prefix tree, so Modified Harmonic's state and
    the reachable-occupancy frontier of the optimum are shared between all
    traces with a common prefix. Every node of the tree is itself a trace.
    """
    config = SwitchConfig(n, B)
    bound = competitive_bound(n)
    rep = ExhaustiveReport(n, B, max_slots, max_packets)
    arrivals: list[tuple[int, int]] = []

    def visit(har: ModifiedHarmonic, accepted: int, frontier: dict, last: int):
        opt = max(frontier.values())
        rep.traces += 1
        r = ratio(opt, accepted)
        if r > rep.worst_ratio:
            rep.worst_ratio = r
            rep.worst_trace = list(arrivals)
        if opt > bound * accepted + 1e-9:
            rep.violations.append({"arrivals": list(arrivals), "opt": opt, "har": accepted, "ratio": r})
        if len(arrivals) == max_packets:
            return
        for s in range(last, max_slots):
            h = har
            f = frontier
            if s > last:
                h = har.copy()
                for _ in range(s - last):
                    if h.state.total == 0:
                        break
                    h.drain()
                f = _frontier_drain(frontier, s - last)
            for port in range(1, n + 1):
                h2 = h.copy()
                d = h2.offer(port)
                arrivals.append((s, port))
                visit(h2, accepted + d.accept, _frontier_step(f, port - 1, B), s)
                arrivals.pop()

    visit(ModifiedHarmonic(config), 0, {(0,) * n: 0}, 0)
    return rep


def _exhaustive_job(args):
    return exhaustive_bound_check(*args)


def exhaustive_suite(ns=(2, 3), Bs=(2, 3, 4), max_slots=4, max_packets=8, workers: int | None = None):
    jobs = [(n, B, max_slots, max_packets) for n in ns for B in Bs]
    if workers == 1:
        return [exhaustive_bound_check(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_exhaustive_job, jobs))


# -- seeded random suite ------------------------------------------------------

SUITE_KINDS = ("uniform", "onoff", "adversarial-shift")


def suite_spec(index: int, seed: int = 0, max_n: int = 6, max_B: int = 20, max_m: int = 200) -> GenSpec:
    """The ``index``-th member of the randomized suite (deterministic)."""
    rng = random.Random(seed * 1_000_003 + index)
    n = rng.randint(1, max_n)
    B = rng.randint(1, max_B)
    # favour short traces so the exact oracle covers most of the suite
    m = rng.choice([rng.randint(1, 24), rng.randint(1, 60), rng.randint(1, max_m)])
    kind = rng.choice(SUITE_KINDS)
    return GenSpec(
        kind=kind, n=n, B=B, m=m, seed=rng.getrandbits(63),
        load=min(float(n), rng.uniform(0.3, 3.0)), rate=rng.randint(1, 3),
        on_mean=rng.uniform(1, 6), off_mean=rng.uniform(1, 6),
        phase_slots=rng.randint(1, max(1, B)),
    )


def suite_traces(count: int, seed: int = 0, **kw):
    for i in range(count):
        yield i, generate(suite_spec(i, seed, **kw))


SUITE_LIMITS = OptLimits(max_packets=24, node_budget=20_000)


def suite_opt(trace: Trace, limits: OptLimits = SUITE_LIMITS):
    """Oracle vector when the search completes within limits, else None."""
    try:
        return offline_opt(trace, limits=limits)
    except BudgetExhausted:
        return None


# -- flood family -------------------------------------------------------------


def flood_family(ns=(2, 4, 8, 16), frontier_states: int = 200_000):
    """Ratios of Modified Harmonic, DT and SMXQ on flood traces.

    OPT is computed exactly with the frontier sweep when it stays within
    ``frontier_states``; otherwise a certified upper bound stands in and
    the row is labelled ``surrogate``.
    """
    rows = []
    for n in ns:
        B = 4 * n
        spec = GenSpec("flood", n, B, flood_slots=2 * B, rate=2)
        trace = generate(spec)
        try:
            opt = opt_count_frontier(trace, max_states=frontier_states)
            source = "exact"
        except BudgetExhausted:
            opt = opt_upper_bound(trace)
            source = "surrogate-upper-bound"
        row = {"n": n, "B": B, "packets": len(trace), "opt": opt, "optSource": source,
               "bound": competitive_bound(n)}
        for name in ("modified-harmonic", "dt", "smxq"):
            alg = simulate(trace, make_policy(name, trace.config)).throughput
            row[name] = alg
            row[f"ratio_{name}"] = ratio(opt, alg)
        rows.append(row)
    return rows


def within(x: float, bound: float) -> bool:
    return x <= bound + 1e-9 and not math.isinf(x)

"""Exact offline optimum for small instances.

``offline_opt`` is a depth-first search over accept/reject decisions in
arrival order (accept first), pruned by the count bound and by a
transposition table keyed on ``(packet index, occupancy vector)``. It
returns the lexicographically first optimal vector.

``opt_count_frontier`` is an independent route: a forward sweep over the
set of reachable occupancy vectors, keeping the best accepted count for
each. It yields the optimal count only and is used to cross-check the
search.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field

from .core import SwitchConfig, Trace
from .simulator import _check, simulate
from .policies import Policy


class BudgetExhausted(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class OptLimits:
    max_packets: int = 24
    node_budget: int = 10**8


@dataclass
class OptResult:
    opt_count: int
    opt_vector: list[bool]
    nodes_explored: int
    exact: bool = True

    def to_dict(self) -> dict:
        return {
            "optCount": self.opt_count,
            "optVector": [int(v) for v in self.opt_vector],
            "nodesExplored": self.nodes_explored,
            "exact": self.exact,
            "lowerBound": not self.exact,
        }


def _gaps(trace: Trace) -> list[int]:
    """Number of transmission rounds between consecutive arrivals."""
    gaps = [0]
    for prev, cur in zip(trace.packets, trace.packets[1:]):
        gaps.append(cur.slot - prev.slot)
    return gaps


def _drained(occ: tuple[int, ...], rounds: int) -> tuple[int, ...]:
    if rounds == 0:
        return occ
    return tuple(o - rounds if o > rounds else 0 for o in occ)


def offline_opt(trace: Trace, config: SwitchConfig | None = None, limits: OptLimits = OptLimits()) -> OptResult:
    config = _check(trace, config)
    m = len(trace)
    B = config.B
    ports = [p.port - 1 for p in trace.packets]
    gaps = _gaps(trace) + [0]
    # Traces at or under max_packets are searched to completion.
    budget = None if m <= limits.max_packets else limits.node_budget

    best = -1
    best_vec: list[bool] = []
    cur: list[bool] = []
    seen: dict = {}
    nodes = 0

    def dfs(i, occ, total, acc):
        nonlocal best, best_vec, nodes
        nodes += 1
        if budget is not None and nodes > budget:
            raise _Stop
        if acc + (m - i) <= best:
            return
        key = (i, occ)
        if seen.get(key, -1) >= acc:
            return
        seen[key] = acc
        if i == m:
            best = acc
            best_vec = cur[:]
            return
        q = ports[i]
        g = gaps[i + 1]
        if total < B:
            nxt = list(occ)
            nxt[q] += 1
            child = _drained(tuple(nxt), g)
            cur.append(True)
            dfs(i + 1, child, sum(child), acc + 1)
            cur.pop()
        child = _drained(occ, g)
        cur.append(False)
        dfs(i + 1, child, sum(child) if g else total, acc)
        cur.pop()

    old_limit = sys.getrecursionlimit()
    if m + 100 > old_limit:
        sys.setrecursionlimit(m + 200)
    try:
        dfs(0, (0,) * config.n, 0, 0)
    except _Stop:
        vec = best_vec if best >= 0 else [False] * m
        partial = OptResult(max(best, 0), vec + [False] * (m - len(vec)), nodes, exact=False)
        raise BudgetExhausted(f"node budget {budget} exhausted after {nodes} nodes", partial) from None
    finally:
        sys.setrecursionlimit(old_limit)
    return OptResult(best, best_vec, nodes, exact=True)


class _Stop(Exception):
    pass


def opt_count_frontier(trace: Trace, config: SwitchConfig | None = None, max_states: int | None = None) -> int:
    """Optimal accepted count via the reachable-occupancy frontier."""
    config = _check(trace, config)
    B = config.B
    frontier = {(0,) * config.n: 0}
    gaps = _gaps(trace)
    for pkt, g in zip(trace.packets, gaps):
        if g:
            drained: dict = {}
            for occ, c in frontier.items():
                d = _drained(occ, g)
                if drained.get(d, -1) < c:
                    drained[d] = c
            frontier = drained
        q = pkt.port - 1
        nxt = dict(frontier)
        for occ, c in frontier.items():
            if sum(occ) < B:
                a = occ[:q] + (occ[q] + 1,) + occ[q + 1:]
                if nxt.get(a, -1) < c + 1:
                    nxt[a] = c + 1
        frontier = nxt
        if max_states is not None and len(frontier) > max_states:
            raise BudgetExhausted(f"frontier exceeded {max_states} states")
    return max(frontier.values())


def per_port_upper_bound(trace: Trace, config: SwitchConfig | None = None) -> int:
    """Upper bound on OPT: give every port a private buffer of size B.

    Any feasible schedule restricted to one port is feasible for a lone
    FIFO of capacity B, where accept-if-room is optimal.
    """
    config = _check(trace, config)
    occ = [0] * config.n
    last = 0
    total = 0
    for p in trace.packets:
        g = p.slot - last
        if g:
            occ = [max(o - g, 0) for o in occ]
            last = p.slot
        if occ[p.port - 1] < config.B:
            occ[p.port - 1] += 1
            total += 1
    return total


def cut_upper_bound(trace: Trace, config: SwitchConfig | None = None) -> int:
    """Upper bound on OPT from a time cut.

    Whatever OPT accepted up to slot t has either left by time t (at most
    what accept-all with unlimited buffer could send) or is among at most B
    buffered packets; everything later is counted as accepted.
    """
    config = _check(trace, config)
    m = len(trace)
    best = m
    occ = [0] * config.n
    departed = 0
    last = 0
    seen = 0
    for i, p in enumerate(trace.packets):
        if p.slot != last:
            for _ in range(p.slot - last):
                busy = sum(1 for o in occ if o)
                if not busy:
                    break
                departed += busy
                occ = [o - 1 if o else 0 for o in occ]
            last = p.slot
        occ[p.port - 1] += 1
        seen = i + 1
        if i + 1 == m or trace.packets[i + 1].slot != p.slot:
            best = min(best, departed + min(config.B, sum(occ)) + (m - seen))
    return best


def opt_upper_bound(trace: Trace, config: SwitchConfig | None = None) -> int:
    return min(per_port_upper_bound(trace, config), cut_upper_bound(trace, config))


@dataclass
class RatioReport:
    opt_count: int
    alg_count: int
    ratio: float
    bound: float
    exact: bool = True
    policy: dict = field(default_factory=dict)

    @property
    def within_bound(self) -> bool:
        return self.ratio <= self.bound

    def to_dict(self) -> dict:
        return {
            "optCount": self.opt_count,
            "algCount": self.alg_count,
            "ratio": self.ratio,
            "bound": self.bound,
            "exact": self.exact,
            "policy": self.policy,
        }


def ratio(opt: int, alg: int) -> float:
    if alg == 0:
        return 1.0 if opt == 0 else math.inf
    return opt / alg


def competitive_bound(n: int) -> float:
    return 2.0 + math.log(n)


def competitive_ratio(
    trace: Trace,
    policy: Policy | str = "modified-harmonic",
    config: SwitchConfig | None = None,
    limits: OptLimits = OptLimits(),
    **policy_params,
) -> RatioReport:
    config = config or trace.config
    opt = offline_opt(trace, config, limits)
    alg = simulate(trace, policy, config, **policy_params)
    return RatioReport(opt.opt_count, alg.throughput, ratio(opt.opt_count, alg.throughput),
                       competitive_bound(config.n), opt.exact, alg.policy)

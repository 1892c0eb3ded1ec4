import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from sharedbuf.core import SwitchConfig, Trace
from sharedbuf.oracle import (
    BudgetExhausted, OptLimits, competitive_bound, competitive_ratio, cut_upper_bound,
    offline_opt, opt_count_frontier, opt_upper_bound, per_port_upper_bound, ratio,
)
from sharedbuf.simulator import replay_acceptance, simulate
from sharedbuf.tracegen import GenSpec, generate

from conftest import traces


def brute_force(trace):
    """Best feasible vector by trying all 2^m acceptance vectors."""
    best = 0
    for vec in itertools.product([True, False], repeat=len(trace)):
        if sum(vec) > best and replay_acceptance(trace, list(vec)).feasible:
            best = sum(vec)
    return best


def test_accept_all_fits():
    t = Trace.from_arrivals(SwitchConfig(2, 3), [(0, 1), (0, 2), (1, 1), (2, 2)])
    assert offline_opt(t).opt_count == len(t)


def test_capacity_forces_one():
    assert offline_opt(Trace.from_ports(SwitchConfig(1, 1), [1, 1])).opt_count == 1
    t = Trace.from_arrivals(SwitchConfig(1, 1), [(0, 1), (0, 1), (1, 1)])
    assert offline_opt(t).opt_count == 2


def test_n2_b2_example():
    r = offline_opt(Trace.from_ports(SwitchConfig(2, 2), [1, 1, 2]))
    assert r.opt_count == 2 and r.exact
    # accept-first search returns the lexicographically first optimum
    assert r.opt_vector == [True, True, False]


@settings(max_examples=150, deadline=None)
@given(traces(max_n=3, max_B=3, max_m=9))
def test_search_matches_brute_force(trace):
    assert offline_opt(trace).opt_count == brute_force(trace)


@settings(max_examples=300, deadline=None)
@given(traces(max_n=4, max_B=6, max_m=20))
def test_search_matches_frontier(trace):
    r = offline_opt(trace)
    assert r.opt_count == opt_count_frontier(trace)
    assert replay_acceptance(trace, r.opt_vector).throughput == r.opt_count


@settings(max_examples=200, deadline=None)
@given(traces(max_n=4, max_B=6, max_m=20), st.data())
def test_permutation_invariance(trace, data):
    perm = data.draw(st.permutations(range(1, trace.config.n + 1)))
    relabeled = trace.relabel(dict(zip(range(1, trace.config.n + 1), perm)))
    assert offline_opt(relabeled).opt_count == offline_opt(trace).opt_count


@settings(max_examples=200, deadline=None)
@given(traces(max_n=4, max_B=6, max_m=20))
def test_opt_dominates_policies(trace):
    opt = offline_opt(trace).opt_count
    for name in ("harmonic", "modified-harmonic", "dt", "sharing", "partitioning", "smxq"):
        assert simulate(trace, name).throughput <= opt
    assert opt <= per_port_upper_bound(trace)
    assert opt <= cut_upper_bound(trace)
    assert opt_upper_bound(trace) <= len(trace)


@settings(max_examples=100, deadline=None)
@given(traces(max_n=1, max_B=4, max_m=12))
def test_n1_greedy_is_optimal(trace):
    assert simulate(trace, "sharing").throughput == offline_opt(trace).opt_count


def test_budget_exhaustion_returns_partial():
    t = generate(GenSpec("uniform", 4, 6, m=60, seed=1, load=3.5))
    with pytest.raises(BudgetExhausted) as e:
        offline_opt(t, limits=OptLimits(max_packets=10, node_budget=50))
    part = e.value.result
    assert not part.exact and len(part.opt_vector) == len(t)
    assert part.to_dict()["lowerBound"]


def test_frontier_budget():
    t = generate(GenSpec("uniform", 6, 20, m=80, seed=2, load=5.0))
    with pytest.raises(BudgetExhausted):
        opt_count_frontier(t, max_states=10)


def test_ratio_conventions():
    assert ratio(0, 0) == 1.0
    assert math.isinf(ratio(3, 0))
    assert competitive_bound(1) == 2.0
    r = competitive_ratio(Trace.from_ports(SwitchConfig(2, 2), []))
    assert r.ratio == 1.0 and r.within_bound


def test_flood_ratio_within_bound():
    t = generate(GenSpec("flood", 2, 8, flood_slots=16))
    r = competitive_ratio(t, "modified-harmonic")
    dt = competitive_ratio(t, "dt")
    assert r.within_bound
    assert dt.opt_count == r.opt_count

import json
import math

import pytest
from hypothesis import given, settings

from sharedbuf.core import SwitchConfig, Trace
from sharedbuf.oracle import offline_opt
from sharedbuf.proofcheck import (
    build_matching, build_submappings, check_g_equals_u, check_proof, heuristic_opt_vector,
    match_cap, partition_opt,
)
from sharedbuf.simulator import replay_acceptance, simulate, simulate_lockstep
from sharedbuf.tracegen import GenSpec, generate

from conftest import traces


def _lock(trace, vector):
    return simulate_lockstep(trace, "modified-harmonic", vector)


def test_match_cap():
    assert [match_cap(n) for n in (1, 2, 3, 4, 8, 20)] == [0, 1, 2, 2, 3, 3]
    for n in range(1, 200):
        c = match_cap(n)
        assert c < 1 + math.log(n) <= c + 1


def test_har_as_opt_gives_identity():
    t = generate(GenSpec("uniform", 3, 6, m=40, seed=5, load=1.5))
    har = simulate(t).vector
    led = check_proof(t, opt_vector=har)
    assert led.partition.A == led.partition.opt and not led.B and not led.C
    assert all(led.submapping.mapping[p] == p for p in led.A)
    assert led.clean
    assert all(v.slack >= 0 for v in led.verdicts)


def test_boundary_case_strict_inequality():
    cfg = SwitchConfig(2, 2)
    t = Trace.from_arrivals(cfg, [(0, 1), (0, 2), (0, 2)])
    # HAR accepts 0 and 1, rejects 2; OPT = {1, 2}
    lock = _lock(t, [False, True, True])
    assert not lock.a.decisions[2].accept
    ev = lock.arrivals[2]
    assert ev.occ_a == ev.occ_b == 1
    assert partition_opt(lock).C == {2}


def test_flood_partition_sums_to_opt():
    t = generate(GenSpec("flood", 2, 4, flood_slots=4))
    led = check_proof(t)
    p = led.partition
    assert p.well_formed() and len(p.A) + len(p.B) + len(p.C) == len(p.opt)


def test_single_b_packet_maps_to_har_packet():
    cfg = SwitchConfig(1, 2)
    t = Trace.from_ports(cfg, [1, 1, 1])
    lock = _lock(t, [False, True, True])
    part = partition_opt(lock)
    assert part.B == {2}
    run = build_submappings(lock, part)
    assert not run.violations and run.mapping[2] in {0, 1}
    run = build_submappings(lock, part, strategy="earliest")
    assert run.mapping[2] == 0


def test_gu_initial_and_har_equals_opt():
    t = Trace.from_ports(SwitchConfig(2, 4), [1, 2, 1])
    lock = _lock(t, simulate(t).vector)
    part = partition_opt(lock)
    rep = check_g_equals_u(lock, part, build_submappings(lock, part))
    assert not rep.mismatches and rep.events_checked > 0


def test_gu_case4_arrival_below_opt_occupancy():
    # HAR-only arrival to a port where HAR holds fewer packets than OPT:
    # u grows by one while g stays 0
    t = Trace.from_arrivals(SwitchConfig(3, 2), [(0, 1), (0, 1), (1, 2), (1, 1)])
    opt = offline_opt(t)
    assert opt.opt_vector == [True, True, True, False]
    led = check_proof(t)
    assert led.gu.arrival_induction_failures == 1
    assert led.gu.by_case() == {"HAR-only": 1}
    m = led.gu.mismatches[0]
    assert (m["g"], m["u"]) == (0, 1)
    # the weaker inequality still holds
    assert not led.gu.arrived_below_g
    assert led.bounds_hold


def test_submapping_needs_transmitted_packets():
    t = Trace.from_arrivals(SwitchConfig(2, 2), [(0, 1), (0, 1), (0, 2), (1, 1), (2, 1), (2, 1)])
    buffered = check_proof(t, pool="buffered")
    arrived = check_proof(t, pool="arrived")
    assert len(buffered.submapping.violations) == 1
    assert not arrived.submapping.violations and arrived.submapping.fallback_to_transmitted == 1
    assert buffered.bounds_hold


def test_matching_fails_after_guard_rejection():
    t = Trace.from_arrivals(SwitchConfig(2, 2), [(0, 1), (0, 1), (0, 2), (1, 1), (1, 1)])
    led = check_proof(t)
    (v,) = led.matching.violations
    assert v["harCause"] == "guard" and v["optPosition"] == 1
    assert led.bounds_hold and led.partition.well_formed()
    # a larger cap cannot help: there is no earlier FIFO position at all
    lock = led.lockstep
    assert build_matching(lock, led.partition, cap=10).violations


def test_empty_c_gives_empty_matching():
    t = Trace.from_ports(SwitchConfig(2, 4), [1, 2])
    led = check_proof(t)
    assert not led.C and not led.matching.matching


def test_verdicts_on_empty_trace():
    led = check_proof(Trace.from_ports(SwitchConfig(3, 3), []))
    assert [(v.lhs, v.rhs) for v in led.verdicts] == [(0, 0), (0.0, 0), (0.0, 0)]
    assert led.bounds_hold


def test_heuristic_vector_is_feasible():
    t = generate(GenSpec("uniform", 5, 12, m=150, seed=11, load=2.0))
    vec, label = heuristic_opt_vector(t)
    assert label.startswith("heuristic:")
    assert replay_acceptance(t, vec).feasible


def test_ledger_serializes():
    t = Trace.from_arrivals(SwitchConfig(2, 2), [(0, 1), (0, 1), (0, 2), (1, 1), (1, 1)])
    led = check_proof(t)
    d = json.loads(json.dumps(led.to_dict()))
    assert len(d["verdicts"]) == 3
    dump = led.event_dump_csv().splitlines()
    assert dump[0].startswith("event,slot,kind")
    assert len(dump) == 1 + len(led.lockstep.events)


@settings(max_examples=150, deadline=None)
@given(traces(max_n=4, max_B=6, max_m=14))
def test_structural_properties(trace):
    led = check_proof(trace)
    assert led.partition.well_formed()
    assert not led.matching.mate_violations
    assert led.bounds_hold
    # with transmitted packets allowed the sub-mapping always succeeds
    assert not check_proof(trace, pool="arrived").submapping.violations
    # counting every arrived unmapped HAR packet, u never falls below g
    assert not led.gu.arrived_below_g
    # failed matches only ever follow capacity-guard rejections
    assert all(v["harCause"] == "guard" for v in led.matching.violations)

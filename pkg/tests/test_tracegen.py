import itertools
from math import comb

import pytest
from hypothesis import given, strategies as st

from sharedbuf.core import SwitchConfig
from sharedbuf.simulator import simulate
from sharedbuf.tracegen import (
    GenSpec, InvalidSpec, enumerate_traces, enumeration_count, generate, generate_all,
)


def count_by_brute_force(n, slots, max_packets):
    """Count traces as ordered arrival lists with nondecreasing slots."""
    total = 0
    for m in range(max_packets + 1):
        for seq in itertools.product(itertools.product(range(slots), range(1, n + 1)), repeat=m):
            if all(a[0] <= b[0] for a, b in zip(seq, seq[1:])):
                total += 1
    return total


def test_enumerate_small_examples():
    one = list(enumerate_traces(1, 1, 1, 2, exact=True))
    assert len(one) == 1 and one[0].arrivals == [(0, 1), (0, 1)]
    assert len(list(enumerate_traces(2, 2, 1, 2, exact=True))) == 4
    assert len(list(enumerate_traces(1, 1, 1, 1))) == 2
    assert len(list(enumerate_traces(2, 2, 1, 2))) == 7


@pytest.mark.parametrize("n,slots,m", [(2, 2, 3), (1, 3, 4), (3, 2, 3), (2, 3, 3)])
def test_enumeration_count(n, slots, m):
    traces = list(enumerate_traces(n, 2, slots, m))
    assert len(traces) == enumeration_count(n, slots, m) == count_by_brute_force(n, slots, m)
    assert len({t.to_csv() for t in traces}) == len(traces)


def test_enumeration_closed_form_n2_s2_m3():
    assert enumeration_count(2, 2, 3) == sum(comb(m + 1, m) * 2**m for m in range(4)) == 49


def test_generate_all_enumerate():
    spec = GenSpec("enumerate", 2, 2, m=2, max_slots=2)
    assert sum(1 for _ in generate_all(spec)) == 12
    with pytest.raises(InvalidSpec):
        generate(spec)


@given(st.sampled_from(["uniform", "onoff"]), st.integers(0, 2**63), st.integers(1, 6))
def test_seeded_determinism(kind, seed, n):
    spec = GenSpec(kind, n, 10, m=50, seed=seed, load=min(0.9, n))
    a, b = generate(spec), generate(spec)
    assert a.arrivals == b.arrivals and len(a) == 50


def test_random_kinds_need_seed():
    with pytest.raises(InvalidSpec):
        GenSpec("uniform", 2, 4).validate()
    with pytest.raises(InvalidSpec):
        GenSpec("bogus", 2, 4).validate()
    with pytest.raises(InvalidSpec):
        GenSpec("uniform", 2, 4, seed=1, load=3.0).validate()


def test_uniform_load():
    t = generate(GenSpec("uniform", 4, 50, m=20000, seed=7, load=2.0))
    # load is the mean number of arrivals per port per slot
    per_port_slot = len(t) / (t.last_slot + 1) / 4
    assert per_port_slot == pytest.approx(2.0, rel=0.05)


def test_flood_separates_dt_from_harmonic():
    t = generate(GenSpec("flood", 8, 64, target=1, flood_slots=64))
    dt = simulate(t, "dt", alpha=1.0).throughput
    mh = simulate(t, "modified-harmonic").throughput
    assert dt < mh


def test_adversarial_shift_moves_target():
    t = generate(GenSpec("adversarial-shift", 3, 6, m=36, rate=2, phase_slots=2))
    ports = [p for _, p in t.arrivals]
    assert ports[:4] == [1] * 4 and ports[4:8] == [2] * 4 and ports[8:12] == [3] * 4
    assert t.config == SwitchConfig(3, 6)

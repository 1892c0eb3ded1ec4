import pytest
from hypothesis import given

from sharedbuf.core import (
    BufferState, CapacityExceeded, EventClock, InvalidTrace, Phase, SwitchConfig, Trace,
    admit, drain, read_trace, validate_trace, write_trace,
)

from conftest import traces


def test_config_validation():
    with pytest.raises(ValueError):
        SwitchConfig(0, 4)
    with pytest.raises(ValueError):
        SwitchConfig(2, 0)
    assert SwitchConfig.from_dict(SwitchConfig(3, 7).to_dict()) == SwitchConfig(3, 7)


def test_validate_examples():
    cfg = SwitchConfig(2, 4)
    assert validate_trace(Trace.from_arrivals(cfg, [(0, 1), (0, 2)])).ok
    bad = validate_trace(Trace.from_arrivals(cfg, [(0, 3)]))
    assert any("port out of range" in v for v in bad.violations)


def test_validate_slot_order():
    from sharedbuf.core import Packet
    t = Trace(SwitchConfig(2, 4), (Packet(0, 1, 1), Packet(1, 0, 1)))
    assert any("slots not nondecreasing" in v for v in validate_trace(t).violations)


def test_admit_examples():
    s = admit(BufferState(2, 4), 1)
    assert s.as_tuple() == (1, 0)
    s = admit(BufferState(2, 4, [2, 1]), 2)
    assert s.as_tuple() == (2, 2)
    with pytest.raises(CapacityExceeded):
        admit(BufferState(1, 3, [3]), 1)


def test_drain_examples():
    s, sent = drain(BufferState(3, 9, [2, 0, 1]))
    assert s.as_tuple() == (1, 0, 0) and set(sent) == {1, 3}
    s, sent = drain(BufferState(2, 4))
    assert s.as_tuple() == (0, 0) and not sent
    s, sent = drain(BufferState(2, 4, [1, 1]))
    assert s.as_tuple() == (0, 0) and set(sent) == {1, 2}


def test_event_clock_orders_drain_before_arrivals():
    a = EventClock(3, Phase.TRANSMIT)
    b = EventClock(3, Phase.ARRIVALS)
    assert a < b < EventClock(4, Phase.TRANSMIT)


@given(traces())
def test_csv_round_trip(trace):
    again = Trace.from_csv(trace.to_csv(), trace.config)
    assert again.arrivals == trace.arrivals


def test_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("a,b\n0,1\n")
    with pytest.raises(InvalidTrace):
        read_trace(p, SwitchConfig(2, 2))
    t = Trace.from_ports(SwitchConfig(2, 2), [1, 2, 2])
    write_trace(t, p)
    assert read_trace(p, t.config).arrivals == t.arrivals

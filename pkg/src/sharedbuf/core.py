"""Domain types and buffer primitives for an n-port shared-memory switch.

Time is slotted: the arrivals labelled slot ``s`` happen, in listed order,
after the departure instant ``t = s`` and before ``t = s + 1``. Ports
transmit at integer times ``t = 1, 2, ...``, so the slot-0 arrivals see an
undrained, empty buffer.
"""

from __future__ import annotations

import csv
import enum
import functools
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence


class CapacityExceeded(RuntimeError):
    """An admission was attempted on a full buffer (a policy bug)."""


class InvalidTrace(ValueError):
    pass


@dataclass(frozen=True)
class SwitchConfig:
    n: int
    B: int

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 1:
            raise ValueError(f"port count n must be an integer >= 1, got {self.n!r}")
        if not isinstance(self.B, int) or self.B < 1:
            raise ValueError(f"buffer capacity B must be an integer >= 1, got {self.B!r}")

    def to_dict(self) -> dict:
        return {"n": self.n, "B": self.B}

    @classmethod
    def from_dict(cls, d: dict) -> "SwitchConfig":
        return cls(n=int(d["n"]), B=int(d["B"]))

    @classmethod
    def from_json(cls, path) -> "SwitchConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Packet:
    id: int
    slot: int
    port: int


@dataclass(frozen=True)
class Trace:
    config: SwitchConfig
    packets: tuple[Packet, ...] = ()

    @classmethod
    def from_arrivals(cls, config: SwitchConfig, arrivals: Iterable[tuple[int, int]]) -> "Trace":
        """Build a trace from ``(slot, port)`` pairs; ids follow the given order."""
        pkts = tuple(Packet(i, int(s), int(p)) for i, (s, p) in enumerate(arrivals))
        return cls(config, pkts)

    @classmethod
    def from_ports(cls, config: SwitchConfig, ports: Sequence[int], slot: int = 0) -> "Trace":
        return cls.from_arrivals(config, [(slot, p) for p in ports])

    def __len__(self):
        return len(self.packets)

    @property
    def arrivals(self) -> list[tuple[int, int]]:
        return [(p.slot, p.port) for p in self.packets]

    @property
    def last_slot(self) -> int:
        return self.packets[-1].slot if self.packets else -1

    def with_config(self, config: SwitchConfig) -> "Trace":
        return Trace(config, self.packets)

    def relabel(self, perm: dict[int, int]) -> "Trace":
        """Return the same arrival pattern with port ``p`` renamed ``perm[p]``."""
        return Trace(self.config, tuple(Packet(p.id, p.slot, perm[p.port]) for p in self.packets))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["slot", "port"])
        for p in self.packets:
            w.writerow([p.slot, p.port])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, config: SwitchConfig) -> "Trace":
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["slot", "port"]:
            raise InvalidTrace("trace CSV must have header 'slot,port'")
        arrivals = []
        for lineno, row in enumerate(reader, start=2):
            try:
                arrivals.append((int(row["slot"]), int(row["port"])))
            except (TypeError, ValueError):
                raise InvalidTrace(f"line {lineno}: expected two integers, got {row!r}") from None
        return cls.from_arrivals(config, arrivals)


def read_trace(path, config: SwitchConfig) -> Trace:
    return Trace.from_csv(Path(path).read_text(encoding="utf-8"), config)


def write_trace(trace: Trace, path) -> None:
    Path(path).write_text(trace.to_csv(), encoding="utf-8", newline="")


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_trace(trace: Trace) -> ValidationReport:
    """Check port range, slot monotonicity and dense, ordered ids.

    Violations are returned as data; nothing is raised.
    """
    report = ValidationReport()
    n = trace.config.n
    prev_slot = None
    seen = set()
    for idx, p in enumerate(trace.packets):
        if not 1 <= p.port <= n:
            report.violations.append(f"packet {p.id}: port out of range ({p.port} not in 1..{n})")
        if p.slot < 0:
            report.violations.append(f"packet {p.id}: negative slot {p.slot}")
        if prev_slot is not None and p.slot < prev_slot:
            report.violations.append(f"packet {p.id}: slots not nondecreasing ({prev_slot} then {p.slot})")
        if p.id in seen:
            report.violations.append(f"packet {p.id}: duplicate id")
        elif p.id != idx:
            report.violations.append(f"packet {p.id}: ids not dense in arrival order (expected {idx})")
        seen.add(p.id)
        prev_slot = p.slot
    return report


class Phase(enum.Enum):
    TRANSMIT = "TRANSMIT"
    ARRIVALS = "ARRIVALS"


@functools.total_ordering
@dataclass(frozen=True)
class EventClock:
    """Position in time; ``TRANSMIT`` of slot s precedes its ``ARRIVALS``."""

    slot: int
    phase: Phase = Phase.ARRIVALS

    def _key(self):
        return (self.slot, self.phase is Phase.ARRIVALS)

    def __lt__(self, other):
        return self._key() < other._key()

    def advance(self) -> "EventClock":
        if self.phase is Phase.TRANSMIT:
            return EventClock(self.slot, Phase.ARRIVALS)
        return EventClock(self.slot + 1, Phase.TRANSMIT)


class BufferState:
    """Per-port occupancies of one buffer. Ports are numbered 1..n.

    Owned by a single run and updated in place.
    """

    __slots__ = ("n", "B", "occ", "total")

    def __init__(self, n: int, B: int, occ: Sequence[int] | None = None):
        self.n = n
        self.B = B
        self.occ = [0] * n if occ is None else list(occ)
        if len(self.occ) != n:
            raise ValueError("occupancy vector length must equal n")
        self.total = sum(self.occ)

    @classmethod
    def empty(cls, config: SwitchConfig) -> "BufferState":
        return cls(config.n, config.B)

    def __getitem__(self, port: int) -> int:
        return self.occ[port - 1]

    def copy(self) -> "BufferState":
        return BufferState(self.n, self.B, self.occ)

    def as_tuple(self) -> tuple[int, ...]:
        return tuple(self.occ)

    def __eq__(self, other):
        if not isinstance(other, BufferState):
            return NotImplemented
        return self.occ == other.occ and self.B == other.B

    def __repr__(self):
        return f"BufferState(occ={self.occ}, total={self.total}, B={self.B})"

    def admit(self, port: int) -> None:
        if self.total >= self.B:
            raise CapacityExceeded(f"admit to port {port} with total={self.total} = B")
        self.occ[port - 1] += 1
        self.total += 1

    def drain(self) -> list[int]:
        """Transmit one packet from every nonempty port; return those ports."""
        sent = []
        occ = self.occ
        for i in range(self.n):
            if occ[i]:
                occ[i] -= 1
                sent.append(i + 1)
        self.total -= len(sent)
        return sent


def admit(state: BufferState, port: int) -> BufferState:
    state.admit(port)
    return state


def drain(state: BufferState) -> tuple[BufferState, list[int]]:
    return state, state.drain()

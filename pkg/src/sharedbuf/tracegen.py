"""Reproducible workloads: random, bursty, adversarial, and exhaustive."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from itertools import combinations_with_replacement, product
from math import comb
from typing import Iterator

import numpy as np

from .core import SwitchConfig, Trace

KINDS = ("uniform", "flood", "onoff", "adversarial-shift", "enumerate")
RANDOM_KINDS = ("uniform", "onoff")


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class GenSpec:
    kind: str
    n: int
    B: int
    m: int = 100
    seed: int | None = None
    load: float = 0.9
    target: int = 1
    flood_slots: int = 64
    rate: int = 2
    burst: int | None = None
    on_mean: float = 4.0
    off_mean: float = 4.0
    phase_slots: int | None = None
    max_slots: int = 1

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown kind {self.kind!r}; choose from {KINDS}")
        if self.n < 1 or self.B < 1:
            raise InvalidSpec("n and B must be >= 1")
        if self.m < 0:
            raise InvalidSpec("m must be >= 0")
        if self.kind in RANDOM_KINDS and self.seed is None:
            raise InvalidSpec(f"kind {self.kind!r} needs an explicit seed")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise InvalidSpec("seed must fit in 64 bits")
        if self.kind == "uniform" and not 0 < self.load <= self.n:
            raise InvalidSpec("load must be in (0, n]")
        if not 1 <= self.target <= self.n:
            raise InvalidSpec("target port out of range")
        if self.rate < 1:
            raise InvalidSpec("rate must be >= 1")
        if self.kind == "enumerate" and self.max_slots < 1:
            raise InvalidSpec("max_slots must be >= 1")

    @property
    def config(self) -> SwitchConfig:
        return SwitchConfig(self.n, self.B)

    def to_dict(self) -> dict:
        return asdict(self)


def generate(spec: GenSpec) -> Trace:
    """Build the single trace described by ``spec`` (all kinds but ``enumerate``)."""
    spec.validate()
    if spec.kind == "enumerate":
        raise InvalidSpec("kind 'enumerate' yields many traces; use generate_all or enumerate_traces")
    arrivals = _BUILDERS[spec.kind](spec)
    return Trace.from_arrivals(spec.config, arrivals)


def generate_all(spec: GenSpec) -> Iterator[Trace]:
    spec.validate()
    if spec.kind == "enumerate":
        yield from enumerate_traces(spec.n, spec.B, spec.max_slots, spec.m, exact=True)
    else:
        yield generate(spec)


def _uniform(spec: GenSpec):
    # n inputs each send with probability `load / n` per slot to a given
    # output, so per-port counts are Binomial(n, load / n) with mean `load`.
    rng = np.random.default_rng(spec.seed)
    p = spec.load / spec.n
    out = []
    slot = 0
    while len(out) < spec.m:
        counts = rng.binomial(spec.n, p, size=spec.n)
        ports = np.repeat(np.arange(1, spec.n + 1), counts)
        rng.shuffle(ports)
        out.extend((slot, int(q)) for q in ports)
        slot += 1
    return out[: spec.m]


def _flood(spec: GenSpec):
    """Overload one port for ``flood_slots`` slots, then hit every port at once."""
    out = []
    for s in range(spec.flood_slots):
        out.extend((s, spec.target) for _ in range(spec.rate))
    burst = spec.B if spec.burst is None else spec.burst
    s = spec.flood_slots
    for _ in range(burst):
        out.extend((s, q) for q in range(1, spec.n + 1))
    return out


def _onoff(spec: GenSpec):
    rng = np.random.default_rng(spec.seed)
    on = rng.random(spec.n) < spec.on_mean / (spec.on_mean + spec.off_mean)
    out = []
    slot = 0
    while len(out) < spec.m:
        ports = [q + 1 for q in range(spec.n) if on[q] for _ in range(spec.rate)]
        order = rng.permutation(len(ports))
        out.extend((slot, ports[i]) for i in order)
        # geometric holding times
        flip_on = rng.random(spec.n) < 1.0 / spec.off_mean
        flip_off = rng.random(spec.n) < 1.0 / spec.on_mean
        on = np.where(on, ~flip_off, flip_on)
        slot += 1
    return out[: spec.m]


def _adversarial_shift(spec: GenSpec):
    """Overload port 1, then port 2, ... so each in turn builds a long queue."""
    phase = spec.phase_slots or max(1, spec.B // spec.n)
    out = []
    slot = 0
    q = 0
    while len(out) < spec.m:
        for _ in range(phase):
            out.extend((slot, q + 1) for _ in range(spec.rate))
            slot += 1
        q = (q + 1) % spec.n
    return out[: spec.m]


_BUILDERS = {
    "uniform": _uniform,
    "flood": _flood,
    "onoff": _onoff,
    "adversarial-shift": _adversarial_shift,
}


def enumerate_traces(n: int, B: int, max_slots: int, max_packets: int, *, exact: bool = False) -> Iterator[Trace]:
    """Every trace with up to ``max_packets`` arrivals in slots ``0..max_slots-1``.

    Arrival order within a slot is significant, so each slot holds an
    ordered sequence of ports. Traces come out by packet count, then
    lexicographically by ``(slot, port)`` sequence. With ``exact`` only
    traces of exactly ``max_packets`` arrivals are produced.
    """
    config = SwitchConfig(n, B)
    sizes = [max_packets] if exact else range(max_packets + 1)
    for m in sizes:
        for slots in combinations_with_replacement(range(max_slots), m):
            for ports in product(range(1, n + 1), repeat=m):
                yield Trace.from_arrivals(config, zip(slots, ports))


def enumeration_count(n: int, max_slots: int, max_packets: int, *, exact: bool = False) -> int:
    sizes = [max_packets] if exact else range(max_packets + 1)
    return sum(comb(m + max_slots - 1, m) * n**m for m in sizes)

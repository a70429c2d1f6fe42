"""CBR sources and per-packet accounting."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .kernel import EventKind, Simulator, to_us

DROP_REASONS = ("no-route", "tx-failure", "recovery-failed", "ttl-expired", "malformed")


class AccountingError(RuntimeError):
    """A packet id was delivered or dropped twice."""


@dataclass(frozen=True)
class CbrFlow:
    flow_id: int
    source: int
    destination: int
    packet_size: int = 512
    bit_rate: float | None = 100_000.0
    packet_rate: float | None = None
    start: float = 10.0
    stop: float = 50.0

    def __post_init__(self):
        if (self.bit_rate is None) == (self.packet_rate is None):
            raise ValueError("give exactly one of bit_rate or packet_rate")
        if self.source == self.destination:
            raise ValueError("flow source and destination must differ")

    @property
    def interval(self) -> float:
        if self.bit_rate is not None:
            return self.packet_size * 8 / self.bit_rate
        return 1.0 / self.packet_rate

    @property
    def interval_us(self) -> int:
        return to_us(self.interval)


@dataclass
class SourceRoute:
    hops: list[int]
    cursor: int = 0

    @property
    def current(self) -> int:
        return self.hops[self.cursor]

    @property
    def next_hop(self) -> int | None:
        if self.cursor + 1 < len(self.hops):
            return self.hops[self.cursor + 1]
        return None

    @property
    def traversed(self) -> list[int]:
        return self.hops[: self.cursor + 1]


@dataclass(eq=False)
class DataPacket:
    id: int
    flow: int
    source: int
    destination: int
    emit_time: int
    size: int = 512
    route: SourceRoute | None = None
    traversed: list[int] = field(default_factory=list)
    ttl: int = 64
    reemitted: int = 0

    def describe(self) -> str:
        route = ""
        if self.route is not None:
            route = " r=" + "-".join(map(str, self.route.hops)) + f"@{self.route.cursor}"
        return f"DATA id={self.id} {self.source}->{self.destination}{route}"


@dataclass
class DropRecord:
    packet_id: int
    node: int
    reason: str
    time: int


class TrafficLedger:
    """Counts generated / delivered / dropped packets with exact conservation."""

    def __init__(self):
        self.generated = 0
        self.delivered = 0
        self.delay_sum_us = 0
        self.drops: list[DropRecord] = []
        self.in_flight: set[int] = set()
        self._closed: set[int] = set()
        self.delivery_listeners: list[Callable[[DataPacket, int], None]] = []

    @property
    def dropped(self) -> int:
        return len(self.drops)

    def generate(self, packet: DataPacket) -> None:
        if packet.id in self.in_flight or packet.id in self._closed:
            raise AccountingError(f"packet {packet.id} generated twice")
        self.generated += 1
        self.in_flight.add(packet.id)

    def _close(self, packet: DataPacket) -> None:
        if packet.id not in self.in_flight:
            raise AccountingError(f"packet {packet.id} accounted twice")
        self.in_flight.remove(packet.id)
        self._closed.add(packet.id)

    def sink_receive(self, packet: DataPacket, now: int) -> int:
        self._close(packet)
        self.delivered += 1
        delay = now - packet.emit_time
        self.delay_sum_us += delay
        for listener in self.delivery_listeners:
            listener(packet, now)
        return delay

    def record_drop(self, packet: DataPacket, node: int, reason: str, now: int) -> None:
        if reason not in DROP_REASONS:
            raise ValueError(f"unknown drop reason {reason!r}")
        self._close(packet)
        self.drops.append(DropRecord(packet.id, node, reason, now))

    def conserved(self) -> bool:
        return self.generated == self.delivered + self.dropped + len(self.in_flight)


class CbrSource:
    """Schedules a flow's emissions; ``emit`` hands each packet to the routing layer."""

    def __init__(
        self,
        sim: Simulator,
        flow: CbrFlow,
        emit: Callable[[DataPacket], None],
        next_id: Callable[[], int],
        alive: Callable[[int], bool] = lambda n: True,
    ):
        self.sim = sim
        self.flow = flow
        self.emit = emit
        self.next_id = next_id
        self.alive = alive
        self.interval_us = flow.interval_us
        self.stop_us = to_us(flow.stop)
        self.emitted = 0

    def start(self) -> None:
        self.sim.schedule(to_us(self.flow.start), EventKind.TRAFFIC, self.flow.source, self.emit_cbr,
                          f"cbr flow={self.flow.flow_id}")

    def emit_cbr(self) -> DataPacket | None:
        now = self.sim.now
        if now > self.stop_us:
            return None
        packet = None
        if self.alive(self.flow.source):
            packet = DataPacket(
                self.next_id(), self.flow.flow_id, self.flow.source, self.flow.destination,
                now, self.flow.packet_size,
            )
            self.emitted += 1
            self.emit(packet)
        nxt = now + self.interval_us
        if nxt <= self.stop_us:
            self.sim.schedule(nxt, EventKind.TRAFFIC, self.flow.source, self.emit_cbr,
                              f"cbr flow={self.flow.flow_id}")
        return packet

"""Failure-recovery schemes: route-error notification, fast TC, data re-emission."""

from __future__ import annotations

from dataclasses import dataclass

from .kernel import to_us
from .traffic import DataPacket

SCHEMES = ("none", "re", "ftc", "dr")


@dataclass(frozen=True)
class RecoveryConfig:
    scheme: str = "none"
    fast_tc_interval: float = 0.5

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown recovery scheme {self.scheme!r}")
        if self.fast_tc_interval < 0:
            raise ValueError("fast_tc_interval must be non-negative")


@dataclass(frozen=True)
class RerrNotif:
    broken_link: tuple[int, int]
    detector: int
    target_source: int
    reverse_route: tuple[int, ...]
    index: int = 0

    def describe(self) -> str:
        a, b = self.broken_link
        return f"RERR {a}-{b} det={self.detector} src={self.target_source}"


@dataclass(eq=False)
class DrEnvelope:
    packet: DataPacket
    embedded_topology: tuple[tuple[int, int], ...]
    reverse_route: tuple[int, ...]
    index: int = 0
    forward: bool = False

    def describe(self) -> str:
        links = ",".join(f"{a}-{b}" for a, b in self.embedded_topology)
        return f"DR id={self.packet.id} [{links}] back={'-'.join(map(str, self.reverse_route))}"


class Recovery:
    """No extra behavior: failures are learned through HELLO/TC timing alone."""

    name = "none"

    def __init__(self, config: RecoveryConfig):
        self.config = config
        self.interval_us = to_us(config.fast_tc_interval)
        self.net = None

    def bind(self, net) -> None:
        self.net = net

    def on_break(self, detector: int, neighbor: int, packet: DataPacket | None) -> None:
        """A data-plane break was observed at ``detector`` toward ``neighbor``."""

    def on_recovery_failed(self, detector: int, neighbor: int, packet: DataPacket) -> bool:
        """Return True when the scheme takes ownership of the packet."""
        return False

    def _purge(self, detector: int, neighbor: int) -> None:
        self.net.agents[detector].neighbor_loss(neighbor)


class RouteError(Recovery):
    name = "re"

    def __init__(self, config: RecoveryConfig):
        super().__init__(config)
        self._last: dict[tuple, int] = {}

    def on_break(self, detector, neighbor, packet):
        self._purge(detector, neighbor)
        if packet is None:
            return
        link = (detector, neighbor)
        source = packet.source
        key = (min(link), max(link), source)
        now = self.net.sim.now
        last = self._last.get(key)
        if last is not None and now - last < self.interval_us:
            return
        self._last[key] = now
        if source == detector:
            self.net.agents[detector].remove_link_info(*link)
            return
        reverse = self.net.reverse_route(detector, packet)
        if reverse is None:
            return
        self.net.send_rerr(RerrNotif(link, detector, source, tuple(reverse)))


class FastTc(Recovery):
    name = "ftc"

    def __init__(self, config: RecoveryConfig):
        super().__init__(config)
        self._last: dict[tuple[int, int, int], int] = {}

    def on_break(self, detector, neighbor, packet):
        self._purge(detector, neighbor)
        key = (detector, min(detector, neighbor), max(detector, neighbor))
        now = self.net.sim.now
        last = self._last.get(key)
        if last is not None and now - last < self.interval_us:
            return
        self._last[key] = now
        agent = self.net.agents[detector]
        agent.emit_tc(agent.build_tc(fast=True))


class DataReemission(Recovery):
    name = "dr"

    def on_break(self, detector, neighbor, packet):
        self._purge(detector, neighbor)

    def on_recovery_failed(self, detector, neighbor, packet):
        if packet.route is None or packet.source == detector:
            return False
        traversed = packet.route.traversed
        reverse = tuple(reversed(traversed))
        env = DrEnvelope(packet, ((detector, neighbor),), reverse)
        self.net.send_envelope(env)
        return True


def make_recovery(config: RecoveryConfig) -> Recovery:
    cls = {"none": Recovery, "re": RouteError, "ftc": FastTc, "dr": DataReemission}[config.scheme]
    return cls(config)

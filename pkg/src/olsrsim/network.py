"""Wires agents, routers, recovery and accounting onto one medium."""

from __future__ import annotations

from dataclasses import replace

from .kernel import Simulator
from .medium import Frame, Medium
from .metrics import FailureTracker, MetricsRecord, _traverses
from .mpolsr import MultipathCostConfig, SourceRouter
from .olsr import Hello, OlsrAgent, ProtocolConfig, Tc
from .recovery import DrEnvelope, Recovery, RecoveryConfig, RerrNotif, make_recovery
from .traffic import DataPacket, TrafficLedger

PROTOCOLS = ("olsr", "mpolsr")


class Network:
    def __init__(
        self,
        sim: Simulator,
        medium: Medium,
        protocol: str = "olsr",
        olsr: ProtocolConfig = ProtocolConfig(),
        mpolsr: MultipathCostConfig = MultipathCostConfig(),
        recovery: RecoveryConfig | Recovery = RecoveryConfig(),
    ):
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        if isinstance(recovery, RecoveryConfig):
            recovery = make_recovery(recovery)
        if recovery.name == "dr" and protocol != "mpolsr":
            raise ValueError("dr recovery requires protocol mpolsr")
        self.sim = sim
        self.medium = medium
        self.protocol = protocol
        self.multipath = protocol == "mpolsr"
        self.recovery = recovery
        recovery.bind(self)
        self.ledger = TrafficLedger()
        self.tracker = FailureTracker()
        self.control: dict[str, int] = {}
        self.flows: list[tuple[int, int]] = []
        self.agents: dict[int, OlsrAgent] = {}
        self.routers: dict[int, SourceRouter] = {}
        self._packet_ids = 0
        self._failures = 0
        for n in medium.nodes:
            agent = OlsrAgent(n, sim, medium, olsr)
            agent.on_control = self._count
            self.agents[n] = agent
            medium.attach(n, lambda frame, n=n: self._receive(n, frame))
            if olsr.lln_enabled:
                medium.register_lln_hook(n, lambda nbr, frame, n=n: self._on_lln(n, nbr, frame))
            if self.multipath:
                router = SourceRouter(agent, mpolsr)
                router.recompute_listeners.append(self._on_pathset)
                self.routers[n] = router
            agent.view_listeners.append(lambda n=n: self._on_view(n))
        medium.silent_loss_handler = self._silent_loss
        medium.failure_listeners.append(self._on_failure)

    # -- setup ----------------------------------------------------------
    def start(self) -> None:
        for n in sorted(self.agents):
            self.agents[n].start()

    def add_flow(self, source: int, destination: int) -> None:
        self.flows.append((source, destination))

    def next_packet_id(self) -> int:
        self._packet_ids += 1
        return self._packet_ids

    def _count(self, kind: str) -> None:
        self.control[kind] = self.control.get(kind, 0) + 1

    @property
    def n_cm(self) -> int:
        return sum(self.control.values())

    def metrics(self) -> MetricsRecord:
        led = self.ledger
        return MetricsRecord(
            n_cm=self.n_cm,
            data_generated=led.generated,
            data_delivered=led.delivered,
            data_dropped=led.dropped,
            delay_sum=led.delay_sum_us / 1e6,
            latencies=list(self.tracker.records),
            control_by_kind=dict(self.control),
        )

    # -- failure tracking -----------------------------------------------
    def current_paths(self, source: int, destination: int) -> list[tuple[int, ...]]:
        if self.multipath:
            return list(self.routers[source].pathset(destination).paths)
        route = self.agents[source].routes.get(destination)
        return [route.path] if route is not None else []

    def _on_failure(self, kind: str, element) -> None:
        self._failures += 1
        for source, dest in self.flows:
            if not self.medium.alive(source):
                continue
            if any(_traverses(p, element) for p in self.current_paths(source, dest)):
                self.tracker.watch(self._failures, element, source, dest, self.sim.now)

    def _on_view(self, node: int) -> None:
        if not self.tracker.watching(node):
            return
        if self.multipath:
            self.routers[node].refresh_invalid()
            return
        for source, dest in self.flows:
            if source == node:
                self.tracker.note_routes(source, dest, self.current_paths(source, dest), self.sim.now)

    def _on_pathset(self, source: int, dest: int, pathset) -> None:
        if self.tracker.watching(source):
            self.tracker.note_routes(source, dest, pathset.paths, self.sim.now)

    # -- data plane -----------------------------------------------------
    def originate(self, packet: DataPacket) -> None:
        self.ledger.generate(packet)
        node = packet.source
        packet.traversed.append(node)
        if not self.multipath:
            self._forward_hop(node, packet)
            return
        route = self.routers[node].select(packet.destination)
        if route is None:
            self._drop(packet, node, "no-route")
            return
        packet.route = route
        self._forward_sr(node, packet)

    def _drop(self, packet: DataPacket, node: int, reason: str) -> None:
        self.ledger.record_drop(packet, node, reason, self.sim.now)

    def _send(self, node: int, next_hop: int, payload, packet: DataPacket) -> None:
        if packet.ttl <= 0:
            self._drop(packet, node, "ttl-expired")
            return
        packet.ttl -= 1
        self.medium.transmit(Frame(node, payload, next_hop, packet.size))

    def _on_data(self, node: int, packet: DataPacket) -> None:
        packet.traversed.append(node)
        if packet.route is not None:
            packet.route.cursor += 1
        if node == packet.destination:
            self.ledger.sink_receive(packet, self.sim.now)
            return
        if self.multipath:
            self._forward_sr(node, packet)
        else:
            self._forward_hop(node, packet)

    def _forward_hop(self, node: int, packet: DataPacket) -> None:
        route = self.agents[node].routes.get(packet.destination)
        if route is None:
            self._drop(packet, node, "no-route")
            return
        self._send(node, route.next_hop, packet, packet)

    def _forward_sr(self, node: int, packet: DataPacket) -> None:
        route = packet.route
        if route is None or route.current != node or route.next_hop is None:
            self._drop(packet, node, "malformed")
            return
        nh = route.next_hop
        if self.agents[node].is_reachable(nh):
            self._send(node, nh, packet, packet)
            return
        self.recovery.on_break(node, nh, packet)
        self._route_recovery(node, nh, packet)

    def _route_recovery(self, node: int, broken: int, packet: DataPacket) -> None:
        new = self.routers[node].recovery_route(packet)
        if new is not None:
            packet.route = new
            self._send(node, new.next_hop, packet, packet)
            return
        self.tracker.note_drop(node, broken, self.sim.now)
        if self.recovery.on_recovery_failed(node, broken, packet):
            return
        self._drop(packet, node, "recovery-failed")

    # -- link-layer feedback --------------------------------------------
    def _on_lln(self, node: int, neighbor: int, frame: Frame) -> None:
        self.agents[node].handle_lln(neighbor)
        payload = frame.payload
        if isinstance(payload, DataPacket):
            if self.multipath:
                self.recovery.on_break(node, neighbor, payload)
                self._route_recovery(node, neighbor, payload)
            else:
                self.tracker.note_drop(node, neighbor, self.sim.now)
                self._drop(payload, node, "tx-failure")
                self.recovery.on_break(node, neighbor, payload)
        elif isinstance(payload, DrEnvelope):
            self._drop(payload.packet, node, "tx-failure")

    def _silent_loss(self, frame: Frame, neighbor: int) -> None:
        payload = frame.payload
        if isinstance(payload, DataPacket):
            self.tracker.note_drop(frame.sender, neighbor, self.sim.now)
            self._drop(payload, frame.sender, "tx-failure")
        elif isinstance(payload, DrEnvelope):
            self._drop(payload.packet, frame.sender, "tx-failure")

    # -- control and envelopes ------------------------------------------
    def _receive(self, node: int, frame: Frame) -> None:
        payload = frame.payload
        if isinstance(payload, (Hello, Tc)):
            self.agents[node].receive(frame)
        elif isinstance(payload, DataPacket):
            self._on_data(node, payload)
        elif isinstance(payload, RerrNotif):
            self._on_rerr(node, payload)
        elif isinstance(payload, DrEnvelope):
            self._on_envelope(node, payload)

    def reverse_route(self, detector: int, packet: DataPacket) -> list[int] | None:
        if packet.route is not None:
            return list(reversed(packet.route.traversed))
        route = self.agents[detector].routes.get(packet.source)
        return list(route.path) if route is not None else None

    def send_rerr(self, notif: RerrNotif) -> None:
        node = notif.reverse_route[notif.index]
        if notif.index + 1 >= len(notif.reverse_route):
            return
        nxt = notif.reverse_route[notif.index + 1]
        self._count("RERR")
        self.medium.transmit(Frame(node, replace(notif, index=notif.index + 1), nxt, 24))

    def _on_rerr(self, node: int, notif: RerrNotif) -> None:
        self.agents[node].remove_link_info(*notif.broken_link)
        if node != notif.target_source:
            self.send_rerr(notif)

    def send_envelope(self, env: DrEnvelope) -> None:
        node = env.reverse_route[env.index]
        nxt = env.reverse_route[env.index + 1]
        self._send(node, nxt, replace(env, index=env.index + 1), env.packet)

    def _on_envelope(self, node: int, env: DrEnvelope) -> None:
        if env.index + 1 < len(env.reverse_route):
            self.send_envelope(env)
            return
        packet = env.packet
        agent = self.agents[node]
        for a, b in env.embedded_topology:
            agent.remove_link_info(a, b)
        router = self.routers[node]
        router.recompute(packet.destination)
        route = router.select(packet.destination)
        if route is None:
            self._drop(packet, node, "no-route")
            return
        packet.route = route
        packet.reemitted += 1
        self._forward_sr(node, packet)

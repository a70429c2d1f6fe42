"""Unit-disk wireless medium with failure injection and link-layer notifications.

There is no MAC model: frames never collide and every hop costs a constant
``per_hop_delay``. Broadcasts are unacknowledged, so only unicast frames can
produce a transmission failure (and therefore an LLN callback).
"""

from __future__ import annotations

import math

import numpy as np
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Protocol

from .kernel import EventKind, Simulator, to_us

Position = tuple[float, float]


class PositionSource(Protocol):
    def position(self, node: int, t_us: int) -> Position: ...


class StaticPositions:
    def __init__(self, positions: dict[int, Position]):
        self.positions = dict(positions)

    def position(self, node: int, t_us: int) -> Position:
        return self.positions[node]


@dataclass(frozen=True)
class MediumConfig:
    tx_range: float = 60.0
    per_hop_delay: float = 0.002
    loss_probability: float = 0.0

    def __post_init__(self):
        if self.tx_range <= 0:
            raise ValueError("tx_range must be positive")
        if self.per_hop_delay <= 0:
            raise ValueError("per_hop_delay must be positive")
        if not 0.0 <= self.loss_probability <= 1.0:
            raise ValueError("loss_probability must lie in [0, 1]")


@dataclass(eq=False)
class Frame:
    sender: int
    payload: Any
    receiver: int | None = None  # None means broadcast
    size: int = 0

    @property
    def broadcast(self) -> bool:
        return self.receiver is None

    def describe(self) -> str:
        dst = "*" if self.receiver is None else str(self.receiver)
        return f"{self.sender}>{dst} {_describe(self.payload)}"


def _describe(payload: Any) -> str:
    fn = getattr(payload, "describe", None)
    return fn() if fn is not None else type(payload).__name__


@dataclass(eq=False)
class _Delivery:
    frame: Frame
    receivers: list[int]

    def describe(self) -> str:
        return f"{self.frame.describe()} to {','.join(map(str, self.receivers))}"


@dataclass(eq=False)
class _TxFailure:
    frame: Frame

    def describe(self) -> str:
        return f"txfail {self.frame.describe()}"


class Medium:
    """Shared channel: range checks, deliveries, failures, LLN hooks."""

    def __init__(
        self,
        sim: Simulator,
        config: MediumConfig,
        positions: PositionSource,
        nodes: Iterable[int],
        static: bool = True,
    ):
        self.sim = sim
        self.config = config
        self.positions = positions
        self.nodes = sorted(nodes)
        self.static = static
        self.delay_us = to_us(config.per_hop_delay)
        self._range_sq = config.tx_range * config.tx_range
        self.failed_nodes: set[int] = set()
        self.failed_links: set[frozenset[int]] = set()
        self._receivers: dict[int, Callable[[Frame], None]] = {}
        self._lln_hooks: dict[int, list[Callable[[int, Frame], None]]] = {}
        self.silent_loss_handler: Callable[[Frame, int], None] | None = None
        self.failure_listeners: list[Callable[[str, Any], None]] = []
        self._nbr_cache: dict[int, frozenset[int]] = {}
        self._nbr_cache_time = -1
        self._pos = None
        self._index = {n: i for i, n in enumerate(self.nodes)}
        self.frames_sent = 0

    # -- wiring ---------------------------------------------------------
    def attach(self, node: int, on_receive: Callable[[Frame], None]) -> None:
        self._receivers[node] = on_receive

    def register_lln_hook(self, node: int, callback: Callable[[int, Frame], None]) -> None:
        self._lln_hooks.setdefault(node, []).append(callback)

    # -- connectivity ---------------------------------------------------
    def alive(self, node: int) -> bool:
        return node not in self.failed_nodes

    def link_up(self, a: int, b: int) -> bool:
        if a in self.failed_nodes or b in self.failed_nodes:
            return False
        return frozenset((a, b)) not in self.failed_links

    def distance(self, a: int, b: int) -> float:
        t = self.sim.now
        ax, ay = self.positions.position(a, t)
        bx, by = self.positions.position(b, t)
        return math.hypot(ax - bx, ay - by)

    def in_range(self, a: int, b: int) -> bool:
        if a == b or not self.link_up(a, b):
            return False
        if not self.static:
            return b in self.neighbors_in_range(a)
        t = self.sim.now
        ax, ay = self.positions.position(a, t)
        bx, by = self.positions.position(b, t)
        return (ax - bx) ** 2 + (ay - by) ** 2 <= self._range_sq

    def _snapshot(self) -> np.ndarray:
        snap = getattr(self.positions, "snapshot", None)
        if snap is not None:
            return snap(self.sim.now)
        t = self.sim.now
        return np.array([self.positions.position(n, t) for n in self.nodes], dtype=float)

    def neighbors_in_range(self, node: int) -> frozenset[int]:
        if node in self.failed_nodes:
            return frozenset()
        # static layouts only change through failures, which clear the cache
        if not self.static and self._nbr_cache_time != self.sim.now:
            self._nbr_cache.clear()
            self._nbr_cache_time = self.sim.now
            self._pos = None
        cached = self._nbr_cache.get(node)
        if cached is None:
            if self.static:
                cached = frozenset(n for n in self.nodes if self.in_range(node, n))
            else:
                if self._pos is None:
                    self._pos = self._snapshot()
                pos = self._pos
                i = self._index[node]
                d2 = ((pos - pos[i]) ** 2).sum(axis=1)
                close = [self.nodes[j] for j in np.nonzero(d2 <= self._range_sq)[0].tolist()]
                cached = frozenset(
                    n for n in close
                    if n != node and n not in self.failed_nodes
                    and frozenset((node, n)) not in self.failed_links
                )
            self._nbr_cache[node] = cached
        return cached

    # -- transmission ---------------------------------------------------
    def transmit(self, frame: Frame) -> bool:
        """Send a frame. Returns False when a unicast cannot be delivered.

        A failed unicast is reported asynchronously to the sender's LLN hooks
        (or to ``silent_loss_handler`` when the sender registered none).
        """
        sender = frame.sender
        if sender in self.failed_nodes:
            return False
        self.frames_sent += 1
        loss = self.config.loss_probability
        if frame.receiver is None:
            receivers = sorted(self.neighbors_in_range(sender))
            if loss > 0.0:
                rng = self.sim.stream(sender, "medium-loss")
                receivers = [r for r in receivers if rng.random() >= loss]
            if receivers:
                delivery = _Delivery(frame, receivers)
                self.sim.schedule_in(
                    self.delay_us, EventKind.DELIVERY, sender, lambda: self._deliver(delivery), delivery
                )
            return True
        receiver = frame.receiver
        ok = self.in_range(sender, receiver)
        if ok and loss > 0.0:
            ok = self.sim.stream(sender, "medium-loss").random() >= loss
        if ok:
            delivery = _Delivery(frame, [receiver])
            self.sim.schedule_in(
                self.delay_us, EventKind.DELIVERY, sender, lambda: self._deliver(delivery), delivery
            )
            return True
        failure = _TxFailure(frame)
        self.sim.schedule_in(
            self.delay_us, EventKind.LINK_NOTIFY, sender, lambda: self._notify_failure(failure), failure
        )
        return False

    def _deliver(self, delivery: _Delivery) -> None:
        frame = delivery.frame
        for r in delivery.receivers:
            # a failure between emission and arrival cuts the frame
            if not self.link_up(frame.sender, r):
                if not frame.broadcast:
                    self._notify_failure(_TxFailure(frame))
                continue
            handler = self._receivers.get(r)
            if handler is not None:
                handler(frame)

    def _notify_failure(self, failure: _TxFailure) -> None:
        frame = failure.frame
        hooks = self._lln_hooks.get(frame.sender)
        if hooks and frame.sender not in self.failed_nodes:
            for hook in hooks:
                hook(frame.receiver, frame)
        elif self.silent_loss_handler is not None:
            self.silent_loss_handler(frame, frame.receiver)

    # -- failures -------------------------------------------------------
    def inject_failure(self, element: int | tuple[int, int], at: int):
        """Fail a node (int) or a link (pair) at time ``at`` (microseconds)."""
        if isinstance(element, tuple):
            a, b = element
            if a == b:
                raise ValueError("a link needs two distinct endpoints")
            element = (min(a, b), max(a, b))
        return self.sim.schedule(
            at, EventKind.FAILURE, element if isinstance(element, int) else element[0],
            lambda: self._apply_failure(element), _FailureNote(element),
        )

    def _apply_failure(self, element: int | tuple[int, int]) -> None:
        if isinstance(element, tuple):
            key = frozenset(element)
            if key in self.failed_links:
                return
            self.failed_links.add(key)
            kind = "link"
        else:
            if element in self.failed_nodes:
                return
            self.failed_nodes.add(element)
            kind = "node"
        self._nbr_cache.clear()
        for listener in self.failure_listeners:
            listener(kind, element)


@dataclass(frozen=True)
class _FailureNote:
    element: int | tuple[int, int]

    def describe(self) -> str:
        if isinstance(self.element, tuple):
            return f"link {self.element[0]}-{self.element[1]}"
        return f"node {self.element}"

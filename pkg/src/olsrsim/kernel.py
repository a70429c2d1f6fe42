"""Discrete-event engine: integer-microsecond clock, event queue, seeded streams."""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, TextIO

US_PER_S = 1_000_000


def to_us(seconds: float) -> int:
    return int(round(seconds * US_PER_S))


def to_s(us: int) -> float:
    return us / US_PER_S


class EventKind(str, Enum):
    TIMER = "timer-fire"
    DELIVERY = "frame-delivery"
    FAILURE = "node-failure"
    TRAFFIC = "traffic-emit"
    EXPIRY = "tuple-expiry"
    LINK_NOTIFY = "link-notify"


class SchedulingError(ValueError):
    """Raised when an event is scheduled before the current clock."""


class SimulationError(RuntimeError):
    pass


@dataclass(eq=False)
class Event:
    fire_time: int
    seq: int
    kind: EventKind
    target: int
    callback: Callable[..., Any] | None
    payload: Any = None
    cancelled: bool = False
    fired: bool = False

    @property
    def pending(self) -> bool:
        return not (self.cancelled or self.fired)


@dataclass
class RunSummary:
    clock: int
    events_fired: int
    events_pending: int


def stream_seed(seed: int, *labels: object) -> int:
    """Stable 64-bit seed for a (master seed, label...) tuple."""
    key = "/".join([str(seed), *(str(label) for label in labels)]).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")


def draw_jitter(max_jitter_us: int, stream: random.Random) -> int:
    """Uniform integer delay in [0, max_jitter_us]."""
    if max_jitter_us < 0:
        raise ValueError("max_jitter must be non-negative")
    if max_jitter_us == 0:
        return 0
    return stream.randint(0, max_jitter_us)


@dataclass
class Simulator:
    seed: int = 0
    trace: TextIO | list[str] | None = None
    now: int = 0
    events_fired: int = 0
    _queue: list = field(default_factory=list, repr=False)
    _seq: int = 0
    _live: int = 0
    _streams: dict = field(default_factory=dict, repr=False)

    def schedule(
        self,
        at: int,
        kind: EventKind,
        target: int,
        callback: Callable[..., Any] | None,
        payload: Any = None,
    ) -> Event:
        if at < self.now:
            raise SchedulingError(
                f"event {kind.value} for node {target} at {at}us is before clock {self.now}us"
            )
        ev = Event(at, self._seq, kind, target, callback, payload)
        self._seq += 1
        self._live += 1
        heapq.heappush(self._queue, (at, ev.seq, ev))
        return ev

    def schedule_in(self, delay: int, kind: EventKind, target: int, callback, payload=None) -> Event:
        return self.schedule(self.now + delay, kind, target, callback, payload)

    def cancel(self, handle: Event | None) -> bool:
        if handle is None or not handle.pending:
            return False
        handle.cancelled = True
        self._live -= 1
        return True

    def __len__(self) -> int:
        return self._live

    def stream(self, *labels: object) -> random.Random:
        rng = self._streams.get(labels)
        if rng is None:
            rng = random.Random(stream_seed(self.seed, *labels))
            self._streams[labels] = rng
        return rng

    def run_until(self, t_end: int) -> RunSummary:
        queue = self._queue
        while queue and queue[0][0] <= t_end:
            at, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = at
            ev.fired = True
            self._live -= 1
            self.events_fired += 1
            if self.trace is not None:
                self._emit_trace(ev)
            if ev.callback is None:
                continue
            try:
                ev.callback()
            except SchedulingError as exc:
                raise SimulationError(
                    f"handler for {ev.kind.value} (seq {ev.seq}, node {ev.target}) at {at}us: {exc}"
                ) from exc
        if t_end > self.now:
            self.now = t_end
        return RunSummary(self.now, self.events_fired, self._live)

    def _emit_trace(self, ev: Event) -> None:
        detail = describe(ev.payload)
        line = f"{ev.fire_time}\t{ev.seq}\t{ev.kind.value}\t{ev.target}\t{detail}"
        if isinstance(self.trace, list):
            self.trace.append(line)
        else:
            self.trace.write(line + "\n")


def describe(payload: Any) -> str:
    if payload is None:
        return "-"
    describe_fn = getattr(payload, "describe", None)
    if describe_fn is not None:
        return describe_fn()
    return str(payload)

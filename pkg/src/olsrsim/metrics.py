"""Run metrics, failure latency bookkeeping and the analytic latency intervals."""

from __future__ import annotations

from dataclasses import dataclass, field

from .kernel import to_s


@dataclass
class LatencyRecord:
    failure_id: int
    source: int
    destination: int
    t_f: int
    t_d: int | None = None
    t_r: int | None = None

    @property
    def complete(self) -> bool:
        return self.t_d is not None and self.t_r is not None

    @property
    def delta(self) -> float | None:
        if not self.complete:
            return None
        return latency(self.t_d, self.t_r)


@dataclass
class MetricsRecord:
    n_cm: int = 0
    data_generated: int = 0
    data_delivered: int = 0
    data_dropped: int = 0
    delay_sum: float = 0.0
    latencies: list[LatencyRecord] = field(default_factory=list)
    control_by_kind: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("n_cm", "data_generated", "data_delivered", "data_dropped"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def latency(t_d_us: int, t_r_us: int) -> float:
    """Latency in seconds from microsecond stamps."""
    return to_s(abs(t_r_us - t_d_us))


def packet_loss_rate(record: MetricsRecord) -> tuple[float, bool]:
    """(percentage, defined). Zero generated packets gives (0.0, False)."""
    if record.data_generated == 0:
        return 0.0, False
    return 100.0 * record.data_dropped / record.data_generated, True


def routing_load(record: MetricsRecord) -> tuple[float, bool]:
    total = record.n_cm + record.data_delivered
    if total == 0:
        return 0.0, False
    return 100.0 * record.n_cm / total, True


def avg_e2e_delay(record: MetricsRecord) -> tuple[float, bool]:
    if record.data_delivered == 0:
        return 0.0, False
    return record.delay_sum / record.data_delivered, True


def analytic_bounds(cfg) -> tuple[tuple[float, float], tuple[float, float]]:
    """Detection-by-expiry interval and detection-by-TC-expiry interval, in seconds."""
    d1 = (cfg.neighb_hold_time - cfg.hello_interval,
          cfg.neighb_hold_time + cfg.tc_interval + cfg.max_jitter)
    d2 = (2 * cfg.tc_interval, 3 * cfg.tc_interval)
    return d1, d2


def _traverses(path, element) -> bool:
    if path is None:
        return False
    if isinstance(element, tuple):
        pair = frozenset(element)
        return any(frozenset(e) == pair for e in zip(path, path[1:]))
    return element in path[1:-1] or (len(path) > 1 and path[-1] == element)


def attributable(node: int, next_hop: int, element) -> bool:
    if isinstance(element, tuple):
        return frozenset((node, next_hop)) == frozenset(element)
    return next_hop == element


class FailureTracker:
    """Stamps T_d and per-source T_r for injected failures.

    At failure time every flow source whose current route(s) use the failed
    element is watched. T_d is the first attributable data drop (or
    interception); T_r is the first source recomputation whose route(s) no
    longer use the element.
    """

    def __init__(self):
        self.records: list[LatencyRecord] = []
        self._active: list[tuple[object, LatencyRecord]] = []

    def watch(self, failure_id: int, element, source: int, destination: int, t_f: int) -> LatencyRecord:
        rec = LatencyRecord(failure_id, source, destination, t_f)
        self.records.append(rec)
        self._active.append((element, rec))
        return rec

    def elements(self):
        return {rec.failure_id: el for el, rec in self._active}

    def note_drop(self, node: int, next_hop: int, now: int) -> None:
        for element, rec in self._active:
            if rec.t_d is None and now >= rec.t_f and attributable(node, next_hop, element):
                rec.t_d = now

    def note_routes(self, source: int, destination: int, paths, now: int) -> None:
        """``paths``: the source's freshly computed route(s) (possibly empty)."""
        for element, rec in self._active:
            if rec.source != source or rec.destination != destination:
                continue
            if rec.t_r is not None or now < rec.t_f:
                continue
            if not any(_traverses(p, element) for p in paths):
                rec.t_r = now

    def watching(self, source: int) -> bool:
        return any(rec.source == source and rec.t_r is None for _, rec in self._active)

    def deltas(self) -> list[float]:
        return [rec.delta for rec in self.records if rec.complete]

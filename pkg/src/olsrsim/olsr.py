"""Per-node OLSR: link sensing, MPR selection, TC flooding, routing table."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping

from .kernel import EventKind, Simulator, draw_jitter, to_us
from .medium import Frame, Medium

ASYM = "ASYM"
SYM = "SYM"
MPR = "MPR"


@dataclass(frozen=True)
class ProtocolConfig:
    hello_interval: float = 2.0
    tc_interval: float = 5.0
    neighb_hold_time: float = 6.0
    top_hold_time: float = 15.0
    max_jitter: float = 0.5
    lln_enabled: bool = True
    send_empty_tc: bool = False
    dup_hold_time: float = 30.0

    def __post_init__(self):
        if self.hello_interval <= 0 or self.tc_interval <= 0:
            raise ValueError("hello_interval and tc_interval must be positive")
        if self.neighb_hold_time <= self.hello_interval:
            raise ValueError("neighb_hold_time must exceed hello_interval")
        if self.top_hold_time <= self.tc_interval:
            raise ValueError("top_hold_time must exceed tc_interval")
        if not 0 <= self.max_jitter < self.hello_interval:
            raise ValueError("max_jitter must lie in [0, hello_interval)")


@dataclass(frozen=True)
class Hello:
    originator: int
    seq: int
    links: tuple[tuple[int, str], ...]

    def code_for(self, node: int) -> str | None:
        for n, code in self.links:
            if n == node:
                return code
        return None

    def describe(self) -> str:
        body = ",".join(f"{n}:{c}" for n, c in self.links)
        return f"HELLO o={self.originator} s={self.seq} [{body}]"


@dataclass(frozen=True)
class Tc:
    originator: int
    seq: int
    ansn: int
    advertised: tuple[int, ...]
    ttl: int = 255
    hops: int = 0
    fast: bool = False

    def describe(self) -> str:
        name = "FAST_TC" if self.fast else "TC"
        adv = ",".join(map(str, self.advertised))
        return f"{name} o={self.originator} s={self.seq} ansn={self.ansn} [{adv}] ttl={self.ttl}"


@dataclass
class LinkTuple:
    neighbor: int
    sym_until: int = 0
    asym_until: int = 0
    expires: int = 0
    was_sym: bool = False


@dataclass
class TopologyEntry:
    """All tuples advertised by one originator (the tuples' last hop)."""

    ansn: int
    dests: dict[int, int] = field(default_factory=dict)  # dest -> expiry


@dataclass(frozen=True)
class Route:
    next_hop: int
    hops: int
    path: tuple[int, ...]


def select_mprs(
    node: int, sym_neighbors: Iterable[int], two_hop: Mapping[int, Iterable[int]]
) -> set[int]:
    """Greedy MPR cover of the strict two-hop neighborhood.

    First the neighbors that are the sole cover of some two-hop node, then
    repeatedly the neighbor covering most uncovered nodes (lowest id on ties).
    """
    neighbors = sorted(set(sym_neighbors))
    nbr_set = set(neighbors)
    coverage = {
        v: set(two_hop.get(v, ())) - nbr_set - {node} for v in neighbors
    }
    covers: dict[int, list[int]] = {}
    for v in neighbors:
        for t in coverage[v]:
            covers.setdefault(t, []).append(v)
    strict = set(covers)
    mprs = {vs[0] for vs in covers.values() if len(vs) == 1}
    covered = set().union(*(coverage[m] for m in mprs)) if mprs else set()
    while len(covered) < len(strict):
        best = max(neighbors, key=lambda v: len(coverage[v] - covered))
        mprs.add(best)
        covered |= coverage[best]
    return mprs


def shortest_paths(adj: Mapping[int, Iterable[int]], source: int) -> dict[int, tuple[int, ...]]:
    """Hop-count shortest paths; ties resolve to the lexicographically smallest path."""
    paths = {source: (source,)}
    frontier = [source]
    while frontier:
        layer: dict[int, tuple[int, ...]] = {}
        for u in frontier:
            base = paths[u]
            for v in sorted(adj.get(u, ())):
                if v not in paths and v not in layer:
                    layer[v] = base + (v,)
        paths.update(layer)
        frontier = sorted(layer, key=layer.__getitem__)
    return paths


class OlsrAgent:
    """OLSR repositories and timers for one node."""

    def __init__(self, node: int, sim: Simulator, medium: Medium, config: ProtocolConfig):
        self.id = node
        self.sim = sim
        self.medium = medium
        self.config = config
        self.hello_us = to_us(config.hello_interval)
        self.tc_us = to_us(config.tc_interval)
        self.hold_us = to_us(config.neighb_hold_time)
        self.top_hold_us = to_us(config.top_hold_time)
        self.jitter_us = to_us(config.max_jitter)
        self.dup_hold_us = to_us(config.dup_hold_time)

        self.links: dict[int, LinkTuple] = {}
        self.two_hop: dict[int, list] = {}  # via -> [frozenset(two-hop ids), expiry]
        self.mprs: frozenset[int] = frozenset()
        self.selectors: dict[int, int] = {}
        self.topology: dict[int, TopologyEntry] = {}
        self.duplicates: dict[tuple[int, int], list] = {}  # (orig, seq) -> [expiry, retransmitted]
        self.lost: set[int] = set()
        # (last, dest) -> (ansn, until): tuples removed on a failure report are
        # not re-learned from TCs that are no newer than the removal
        self.suppressed: dict[tuple[int, int], tuple[int, int]] = {}

        self.ansn = 0
        self._last_advertised: tuple[int, ...] | None = None
        self._seq = 0
        self.view_version = 0
        self.graph_version = 0
        self._last_graph: dict[int, set[int]] | None = None
        self._graph: dict[int, set[int]] | None = None
        self._routes: dict[int, Route] | None = None
        self._expiry_event = None

        self.view_listeners: list[Callable[[], None]] = []
        self.on_control: Callable[[str], None] | None = None
        self.tc_log: list[tuple[int, Tc]] = []

    # -- lifecycle ------------------------------------------------------
    def start(self) -> None:
        hello_offset = self.sim.stream(self.id, "hello-offset").randrange(self.hello_us)
        tc_offset = draw_jitter(self.jitter_us, self.sim.stream(self.id, "tc-offset"))
        self.sim.schedule_in(hello_offset, EventKind.TIMER, self.id, self._hello_timer, "hello-timer")
        self.sim.schedule_in(tc_offset, EventKind.TIMER, self.id, self._tc_timer, "tc-timer")

    @property
    def alive(self) -> bool:
        return self.medium.alive(self.id)

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _count(self, kind: str) -> None:
        if self.on_control is not None:
            self.on_control(kind)

    def receive(self, frame: Frame) -> None:
        msg = frame.payload
        if isinstance(msg, Hello):
            self.process_hello(msg, frame.sender)
        elif isinstance(msg, Tc):
            self.receive_tc(msg, frame.sender)

    # -- neighborhood ---------------------------------------------------
    def is_symmetric(self, n: int) -> bool:
        lt = self.links.get(n)
        return lt is not None and lt.sym_until > self.sim.now

    def is_reachable(self, n: int) -> bool:
        """Symmetric per the link set and not flagged by a link-layer failure."""
        return n not in self.lost and self.is_symmetric(n)

    def sym_neighbors(self) -> list[int]:
        now = self.sim.now
        return sorted(n for n, lt in self.links.items() if lt.sym_until > now)

    def hello_links(self) -> tuple[tuple[int, str], ...]:
        now = self.sim.now
        out = []
        for n in sorted(self.links):
            lt = self.links[n]
            if lt.sym_until > now:
                out.append((n, MPR if n in self.mprs else SYM))
            elif lt.asym_until > now:
                out.append((n, ASYM))
        return tuple(out)

    def generate_hello(self) -> Hello:
        msg = Hello(self.id, self._next_seq(), self.hello_links())
        self.medium.transmit(Frame(self.id, msg, None, 16 + 8 * len(msg.links)))
        self._count("HELLO")
        return msg

    def _hello_timer(self) -> None:
        if not self.alive:
            return
        self.generate_hello()
        self.sim.schedule_in(self.hello_us, EventKind.TIMER, self.id, self._hello_timer, "hello-timer")

    def process_hello(self, msg: Hello, sender: int) -> None:
        if sender == self.id:
            return
        now = self.sim.now
        lt = self.links.get(sender)
        if lt is None:
            lt = self.links[sender] = LinkTuple(sender)
        lt.asym_until = now + self.hold_us
        code = msg.code_for(self.id)
        if code is not None:
            lt.sym_until = now + self.hold_us
        lt.expires = max(lt.asym_until, lt.sym_until)
        self._arm(lt.expires)

        view_changed = False
        if sender in self.lost:
            self.lost.discard(sender)
            view_changed = True
        changed = False
        if lt.sym_until > now:
            if not lt.was_sym:
                lt.was_sym = True
                changed = True
            reported = frozenset(n for n, c in msg.links if c != ASYM and n != self.id)
            entry = self.two_hop.get(sender)
            if entry is None or entry[0] != reported:
                changed = True
            self.two_hop[sender] = [reported, now + self.hold_us]
            if code == MPR:
                self.selectors[sender] = now + self.hold_us
        if changed:
            self._neighborhood_changed()
        elif view_changed:
            self._view_changed()

    def _recompute_mprs(self) -> None:
        now = self.sim.now
        sym = [n for n, lt in self.links.items() if lt.sym_until > now]
        two = {v: self.two_hop[v][0] for v in sym if v in self.two_hop}
        self.mprs = frozenset(select_mprs(self.id, sym, two))

    def _neighborhood_changed(self) -> None:
        self._recompute_mprs()
        self._view_changed()

    def neighbor_loss(self, n: int) -> bool:
        """Drop every piece of state learned through neighbor ``n``."""
        had = n in self.links or n in self.two_hop or n in self.selectors
        self.links.pop(n, None)
        self.two_hop.pop(n, None)
        self.selectors.pop(n, None)
        self.lost.discard(n)
        if had:
            self._neighborhood_changed()
        return had

    def handle_lln(self, n: int) -> bool:
        """Link-layer report that ``n`` did not receive a unicast.

        The link is excluded from this node's own forwarding decisions at once;
        HELLO-derived state keeps following its hold timers. Returns True on
        the first report for a known neighbor.
        """
        if n not in self.links or n in self.lost:
            return False
        self.lost.add(n)
        self._view_changed()
        return True

    # -- topology -------------------------------------------------------
    def advertised_set(self) -> tuple[int, ...]:
        now = self.sim.now
        return tuple(sorted(s for s, exp in self.selectors.items() if exp > now))

    def build_tc(self, fast: bool = False) -> Tc | None:
        advertised = self.advertised_set()
        if advertised != self._last_advertised:
            if self._last_advertised is not None or advertised:
                self.ansn += 1
            self._last_advertised = advertised
        if not advertised and not (fast or self.config.send_empty_tc):
            return None
        return Tc(self.id, 0, self.ansn, advertised, fast=fast)

    def generate_tc(self) -> Tc | None:
        msg = self.build_tc()
        if msg is not None:
            jitter = draw_jitter(self.jitter_us, self.sim.stream(self.id, "tc-jitter"))
            self.sim.schedule_in(jitter, EventKind.TIMER, self.id, lambda: self.emit_tc(msg), msg)
        return msg

    def emit_tc(self, msg: Tc) -> Tc | None:
        if not self.alive:
            return None
        msg = replace(msg, seq=self._next_seq())
        self.medium.transmit(Frame(self.id, msg, None, 16 + 4 * len(msg.advertised)))
        self.tc_log.append((self.sim.now, msg))
        self._count("FAST_TC" if msg.fast else "TC")
        return msg

    def _tc_timer(self) -> None:
        if not self.alive:
            return
        self.generate_tc()
        self.sim.schedule_in(self.tc_us, EventKind.TIMER, self.id, self._tc_timer, "tc-timer")

    def receive_tc(self, msg: Tc, sender: int) -> None:
        if msg.originator == self.id or not self.is_symmetric(sender):
            return
        now = self.sim.now
        key = (msg.originator, msg.seq)
        dup = self.duplicates.get(key)
        if dup is None:
            dup = self.duplicates[key] = [now + self.dup_hold_us, False]
            self.process_tc(msg)
        if dup[1] or msg.ttl <= 1:
            return
        if self.selectors.get(sender, -1) > now:
            dup[1] = True
            fwd = replace(msg, ttl=msg.ttl - 1, hops=msg.hops + 1)
            jitter = draw_jitter(self.jitter_us, self.sim.stream(self.id, "fwd-jitter"))
            self.sim.schedule_in(jitter, EventKind.TIMER, self.id, lambda: self._retransmit(fwd), fwd)

    def _retransmit(self, msg: Tc) -> None:
        if not self.alive:
            return
        self.medium.transmit(Frame(self.id, msg, None, 16 + 4 * len(msg.advertised)))
        self._count("TC_FWD")

    def process_tc(self, msg: Tc) -> bool:
        now = self.sim.now
        entry = self.topology.get(msg.originator)
        if entry is not None and entry.ansn > msg.ansn:
            return False
        changed = False
        if entry is None or msg.ansn > entry.ansn:
            if entry is not None and set(entry.dests) - set(msg.advertised):
                changed = True
            entry = TopologyEntry(msg.ansn, {})
            self.topology[msg.originator] = entry
        expiry = now + self.top_hold_us
        for dest in msg.advertised:
            sup = self.suppressed.get((msg.originator, dest))
            if sup is not None:
                if sup[1] > now and msg.ansn <= sup[0]:
                    continue
                del self.suppressed[(msg.originator, dest)]
            if dest not in entry.dests:
                changed = True
            entry.dests[dest] = expiry
        if not entry.dests:
            del self.topology[msg.originator]
        else:
            self._arm(expiry)
        if changed:
            self._view_changed()
        return changed

    def remove_link_info(self, a: int, b: int) -> bool:
        """Forget every tuple describing the link a-b (both orientations)."""
        changed = False
        until = self.sim.now + self.top_hold_us
        for last, dest in ((a, b), (b, a)):
            entry = self.topology.get(last)
            if entry is not None:
                self.suppressed[(last, dest)] = (entry.ansn, until)
            if entry is not None and dest in entry.dests:
                del entry.dests[dest]
                changed = True
                if not entry.dests:
                    del self.topology[last]
            two = self.two_hop.get(last)
            if two is not None and dest in two[0]:
                two[0] = two[0] - {dest}
                changed = True
        if changed:
            self._neighborhood_changed()
        return changed

    # -- expiry ---------------------------------------------------------
    def _arm(self, deadline: int) -> None:
        ev = self._expiry_event
        if ev is not None and ev.pending and ev.fire_time <= deadline:
            return
        self.sim.cancel(ev)
        self._expiry_event = self.sim.schedule(
            deadline, EventKind.EXPIRY, self.id, self.expire_tuples, "expiry"
        )

    def _next_deadline(self) -> int | None:
        best = None
        for lt in self.links.values():
            cand = lt.sym_until if lt.was_sym and lt.sym_until < lt.expires else lt.expires
            if best is None or cand < best:
                best = cand
        for _, exp in self.two_hop.values():
            if best is None or exp < best:
                best = exp
        for exp in self.selectors.values():
            if best is None or exp < best:
                best = exp
        for entry in self.topology.values():
            for exp in entry.dests.values():
                if best is None or exp < best:
                    best = exp
        return best

    def expire_tuples(self) -> None:
        self._expiry_event = None
        if not self.alive:
            return
        now = self.sim.now
        nbr_changed = False
        view_changed = False
        for n in sorted(self.links):
            lt = self.links[n]
            if lt.was_sym and lt.sym_until <= now:
                lt.was_sym = False
                self.two_hop.pop(n, None)
                self.selectors.pop(n, None)
                nbr_changed = True
            if lt.expires <= now:
                del self.links[n]
                if n in self.lost:
                    self.lost.discard(n)
                    view_changed = True
        for via in [v for v, (_, exp) in self.two_hop.items() if exp <= now]:
            del self.two_hop[via]
            nbr_changed = True
        for sel in [s for s, exp in self.selectors.items() if exp <= now]:
            del self.selectors[sel]
        for last in list(self.topology):
            entry = self.topology[last]
            stale = [d for d, exp in entry.dests.items() if exp <= now]
            for d in stale:
                del entry.dests[d]
            if stale:
                view_changed = True
            if not entry.dests:
                del self.topology[last]
        for key in [k for k, d in self.duplicates.items() if d[0] <= now]:
            del self.duplicates[key]
        if nbr_changed:
            self._neighborhood_changed()
        elif view_changed:
            self._view_changed()
        nxt = self._next_deadline()
        if nxt is not None:
            self._arm(max(nxt, now))

    # -- routing --------------------------------------------------------
    def _view_changed(self) -> None:
        self.view_version += 1
        self._graph = None
        for listener in self.view_listeners:
            listener()

    def graph(self) -> dict[int, set[int]]:
        """Directed adjacency of this node's current topology view."""
        if self._graph is not None:
            return self._graph
        now = self.sim.now
        adj: dict[int, set[int]] = {}
        reachable = [n for n, lt in self.links.items() if lt.sym_until > now and n not in self.lost]
        adj[self.id] = set(reachable)
        for via in reachable:
            entry = self.two_hop.get(via)
            if entry is not None:
                adj.setdefault(via, set()).update(m for m in entry[0] if m != self.id)
        for last, entry in self.topology.items():
            if last == self.id:
                continue
            adj.setdefault(last, set()).update(d for d in entry.dests if d != last)
        if adj != self._last_graph:
            self.graph_version += 1
            self._last_graph = adj
            self._routes = None
        else:
            adj = self._last_graph
        self._graph = adj
        return adj

    @property
    def routes(self) -> dict[int, Route]:
        adj = self.graph()
        if self._routes is None:
            paths = shortest_paths(adj, self.id)
            self._routes = {
                d: Route(p[1], len(p) - 1, p) for d, p in paths.items() if d != self.id
            }
        return self._routes

    def compute_routes(self) -> dict[int, Route]:
        self._routes = None
        return self.routes

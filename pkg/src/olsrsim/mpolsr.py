"""Multipath source routing on top of the OLSR topology view."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .traffic import SourceRoute

NODE_DISJOINT = "node-disjoint"
LINK_DISJOINT = "link-disjoint"


@dataclass(frozen=True)
class MultipathCostConfig:
    node_penalty_factor: float = 3.0
    edge_penalty_factor: float = 2.0
    disjointness_mode: str = NODE_DISJOINT
    k: int = 2

    def __post_init__(self):
        if self.node_penalty_factor < 1 or self.edge_penalty_factor < 1:
            raise ValueError("penalty factors must be >= 1")
        if self.disjointness_mode not in (NODE_DISJOINT, LINK_DISJOINT):
            raise ValueError(f"unknown disjointness_mode {self.disjointness_mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class PathSet:
    paths: list[tuple[int, ...]] = field(default_factory=list)
    rr_index: int = 0
    version: int = -1


def _dijkstra(adj: Mapping[int, Iterable[int]], cost: dict, source: int, destination: int):
    """Cheapest path; equal costs resolve to the lexicographically smallest path."""
    heap = [(0.0, (source,))]
    done = set()
    while heap:
        c, path = heapq.heappop(heap)
        u = path[-1]
        if u in done:
            continue
        done.add(u)
        if u == destination:
            return path
        for v in adj.get(u, ()):
            if v not in done:
                heapq.heappush(heap, (c + cost.get((u, v), 1.0), path + (v,)))
    return None


def multipath_dijkstra(
    source: int,
    destination: int,
    adj: Mapping[int, Iterable[int]],
    config: MultipathCostConfig = MultipathCostConfig(),
    k: int | None = None,
) -> list[tuple[int, ...]]:
    """Up to k paths by repeated Dijkstra with multiplicative cost penalties.

    After each run the edges of the found path (both directions) are scaled by
    the edge factor; in node-disjoint mode every edge touching one of its
    intermediate nodes is also scaled by the node factor. Repeats and paths
    violating the disjointness mode are discarded.
    """
    k = config.k if k is None else k
    if source == destination:
        return []
    cost: dict[tuple[int, int], float] = {}
    paths: list[tuple[int, ...]] = []
    node_mode = config.disjointness_mode == NODE_DISJOINT
    rev = None
    for _ in range(k):
        path = _dijkstra(adj, cost, source, destination)
        if path is None:
            break
        if path not in paths and all(_compatible(path, p, node_mode) for p in paths):
            paths.append(path)
        for a, b in zip(path, path[1:]):
            for e in ((a, b), (b, a)):
                cost[e] = cost.get(e, 1.0) * config.edge_penalty_factor
        if node_mode:
            inner = set(path[1:-1])
            if rev is None:
                rev = {}
                for u, nbrs in adj.items():
                    for v in nbrs:
                        rev.setdefault(v, []).append(u)
            touched = set()
            for x in inner:
                touched.update((x, v) for v in adj.get(x, ()))
                touched.update((u, x) for u in rev.get(x, ()))
            for e in touched:
                cost[e] = cost.get(e, 1.0) * config.node_penalty_factor
    return paths


def _compatible(a: tuple[int, ...], b: tuple[int, ...], node_mode: bool) -> bool:
    if node_mode:
        return not (set(a[1:-1]) & set(b[1:-1]))
    ea = {frozenset(e) for e in zip(a, a[1:])}
    eb = {frozenset(e) for e in zip(b, b[1:])}
    return not (ea & eb)


def bfs_avoiding(adj: Mapping[int, Iterable[int]], source: int, destination: int, avoid: set[int]):
    """Shortest hop path that never enters ``avoid`` (lexicographic ties)."""
    paths = {source: (source,)}
    frontier = [source]
    while frontier:
        layer = {}
        for u in frontier:
            for v in sorted(adj.get(u, ())):
                if v in avoid or v in paths or v in layer:
                    continue
                layer[v] = paths[u] + (v,)
        if destination in layer:
            return layer[destination]
        paths.update(layer)
        frontier = sorted(layer, key=layer.__getitem__)
    return None


class SourceRouter:
    """Per-source PathSets with round robin over currently valid paths."""

    def __init__(self, agent, config: MultipathCostConfig):
        self.agent = agent
        self.config = config
        self.pathsets: dict[int, PathSet] = {}
        self.recompute_listeners = []

    def path_valid(self, path: tuple[int, ...]) -> bool:
        adj = self.agent.graph()
        if len(path) < 2 or path[1] not in adj.get(self.agent.id, ()):
            return False
        return all(b in adj.get(a, ()) for a, b in zip(path, path[1:]))

    def recompute(self, destination: int) -> PathSet:
        ps = self.pathsets.get(destination)
        if ps is None:
            ps = self.pathsets[destination] = PathSet()
        ps.paths = multipath_dijkstra(self.agent.id, destination, self.agent.graph(), self.config)
        ps.version = self.agent.graph_version
        for listener in self.recompute_listeners:
            listener(self.agent.id, destination, ps)
        return ps

    def pathset(self, destination: int) -> PathSet:
        ps = self.pathsets.get(destination)
        if ps is None or ps.version != self.agent.graph_version or self.agent._graph is None:
            self.agent.graph()
            if ps is None or ps.version != self.agent.graph_version:
                ps = self.recompute(destination)
        return ps

    def refresh_invalid(self) -> None:
        """Recompute at once every PathSet holding a path the view no longer supports."""
        for dest in sorted(self.pathsets):
            ps = self.pathsets[dest]
            if any(not self.path_valid(p) for p in ps.paths):
                self.recompute(dest)

    def select(self, destination: int) -> SourceRoute | None:
        ps = self.pathset(destination)
        valid = [p for p in ps.paths if self.path_valid(p)]
        if not valid:
            return None
        path = valid[ps.rr_index % len(valid)]
        ps.rr_index += 1
        return SourceRoute(list(path))

    def recovery_route(self, packet) -> SourceRoute | None:
        """Replace the remainder of ``packet.route`` from this node, avoiding visited hops."""
        route = packet.route
        traversed = route.traversed
        adj = self.agent.graph()
        tail = bfs_avoiding(adj, self.agent.id, packet.destination, set(traversed[:-1]))
        if tail is None:
            return None
        return SourceRoute(traversed[:-1] + list(tail), route.cursor)

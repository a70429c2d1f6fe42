"""Topology generators: the dual-chain layout and Random Waypoint motion."""

from __future__ import annotations

import bisect
import math
import random
from dataclasses import dataclass

import numpy as np

Position = tuple[float, float]

CHAIN_SPACING = 50.0


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class DualChain:
    intermediates: int
    source: int
    destination: int
    upper: tuple[int, ...]
    lower: tuple[int, ...]
    positions: dict[int, Position]

    @property
    def nodes(self) -> list[int]:
        return sorted(self.positions)

    def upper_path(self) -> list[int]:
        return [self.source, *self.upper, self.destination]

    def lower_path(self) -> list[int]:
        return [self.source, *self.lower, self.destination]

    def edges(self) -> set[frozenset[int]]:
        out = set()
        for path in (self.upper_path(), self.lower_path()):
            out.update(frozenset(p) for p in zip(path, path[1:]))
        return out


def dual_chain_layout(intermediates_per_path: int, spacing: float = CHAIN_SPACING) -> DualChain:
    """Two node-disjoint chains between node 0 and node p+1, laid on a ring.

    All 2p+2 nodes sit on a regular polygon with side ``spacing``, walked as
    0, 1..p, p+1, 2p+1..p+2, so consecutive chain members are ``spacing``
    apart and any two non-adjacent nodes are farther apart than one side.
    For p=3 the ring spans about 131 m and is centred in a 150 m square.
    """
    p = intermediates_per_path
    if p < 1:
        raise LayoutError("need at least one intermediate per chain")
    count = 2 * p + 2
    radius = spacing / (2 * math.sin(math.pi / count))
    centre = max(75.0, radius + 10.0)
    ring = list(range(p + 2)) + list(range(2 * p + 1, p + 1, -1))
    positions = {}
    for slot, node in enumerate(ring):
        angle = math.pi - 2 * math.pi * slot / count
        positions[node] = (
            round(centre + radius * math.cos(angle), 6),
            round(centre + radius * math.sin(angle), 6),
        )
    return DualChain(
        p, 0, p + 1, tuple(range(1, p + 1)), tuple(range(p + 2, 2 * p + 2)), positions
    )


def verify_dual_chain(layout: DualChain, tx_range: float) -> None:
    """Raise LayoutError unless the unit-disk graph equals the two chains exactly."""
    expected = layout.edges()
    nodes = layout.nodes
    for i, a in enumerate(nodes):
        for b in nodes[i + 1:]:
            ax, ay = layout.positions[a]
            bx, by = layout.positions[b]
            linked = math.hypot(ax - bx, ay - by) <= tx_range
            if linked != (frozenset((a, b)) in expected):
                raise LayoutError(f"nodes {a} and {b} violate the dual-chain adjacency")


@dataclass(frozen=True)
class RwpConfig:
    width: float = 1000.0
    height: float = 1000.0
    speed_min: float = 1.0
    speed_max: float = 10.0
    pause: float = 0.0

    def __post_init__(self):
        if not 0 < self.speed_min <= self.speed_max:
            raise ValueError("need 0 < speed_min <= speed_max")
        if self.pause < 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("invalid area or pause")


class RandomWaypoint:
    """Piecewise-linear trajectories, generated lazily per node.

    Each leg picks a uniform waypoint in the area and a uniform speed in
    [speed_min, speed_max]; after arrival the node pauses, then repeats.
    """

    def __init__(self, config: RwpConfig, nodes, rng_for):
        self.config = config
        self._rng = {n: rng_for(n) for n in nodes}
        # per node: leg start times (us) and (t0, t1, p0, p1) tuples
        self._starts: dict[int, list[int]] = {}
        self._legs: dict[int, list[tuple[int, int, Position, Position]]] = {}
        self.nodes = sorted(nodes)
        for n in self.nodes:
            rng = self._rng[n]
            start = (rng.uniform(0, config.width), rng.uniform(0, config.height))
            self._starts[n] = []
            self._legs[n] = []
            self._append_leg(n, 0, start)
        # current leg per node, as arrays for vectorized snapshots
        self._cur = [0] * len(self.nodes)
        self._t0 = np.zeros(len(self.nodes))
        self._t1 = np.zeros(len(self.nodes))
        self._p0 = np.zeros((len(self.nodes), 2))
        self._p1 = np.zeros((len(self.nodes), 2))
        for i in range(len(self.nodes)):
            self._load_leg(i)

    def initial_position(self, node: int) -> Position:
        return self._legs[node][0][2]

    def _append_leg(self, node: int, t0: int, origin: Position) -> None:
        cfg = self.config
        rng = self._rng[node]
        target = (rng.uniform(0, cfg.width), rng.uniform(0, cfg.height))
        speed = rng.uniform(cfg.speed_min, cfg.speed_max)
        dist = math.hypot(target[0] - origin[0], target[1] - origin[1])
        t1 = t0 + max(1, int(round(dist / speed * 1_000_000)))
        self._starts[node].append(t0)
        self._legs[node].append((t0, t1, origin, target))
        if cfg.pause > 0:
            tp = t1 + int(round(cfg.pause * 1_000_000))
            self._starts[node].append(t1)
            self._legs[node].append((t1, tp, target, target))

    def _extend(self, node: int, t_us: int) -> None:
        legs = self._legs[node]
        while legs[-1][1] <= t_us:
            self._append_leg(node, legs[-1][1], legs[-1][3])

    def position(self, node: int, t_us: int) -> Position:
        self._extend(node, t_us)
        i = bisect.bisect_right(self._starts[node], t_us) - 1
        t0, t1, (x0, y0), (x1, y1) = self._legs[node][i]
        frac = (t_us - t0) / (t1 - t0)
        return (x0 + (x1 - x0) * frac, y0 + (y1 - y0) * frac)

    def _load_leg(self, i: int) -> None:
        t0, t1, p0, p1 = self._legs[self.nodes[i]][self._cur[i]]
        self._t0[i], self._t1[i] = t0, t1
        self._p0[i] = p0
        self._p1[i] = p1

    def snapshot(self, t_us: int) -> np.ndarray:
        """Positions of all nodes (rows in sorted node order) at ``t_us``."""
        for i in np.nonzero(self._t1 <= t_us)[0]:
            node = self.nodes[i]
            self._extend(node, t_us)
            j = bisect.bisect_right(self._starts[node], t_us) - 1
            self._cur[i] = j
            self._load_leg(i)
        frac = (t_us - self._t0) / (self._t1 - self._t0)
        return self._p0 + (self._p1 - self._p0) * frac[:, None]

    def legs(self, node: int, until_us: int):
        self._extend(node, until_us)
        return [leg for leg in self._legs[node] if leg[0] <= until_us]


def random_positions(count: int, width: float, height: float, rng: random.Random) -> dict[int, Position]:
    return {n: (rng.uniform(0, width), rng.uniform(0, height)) for n in range(count)}

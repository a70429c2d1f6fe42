import math
import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from olsrsim.kernel import Simulator, to_us
from olsrsim.mobility import (
    LayoutError,
    RandomWaypoint,
    RwpConfig,
    dual_chain_layout,
    verify_dual_chain,
)
from olsrsim.traffic import AccountingError, CbrFlow, CbrSource, DataPacket, TrafficLedger


def unit_disk(positions, tx_range=60.0):
    g = nx.Graph()
    g.add_nodes_from(positions)
    for a in positions:
        for b in positions:
            if a < b and math.dist(positions[a], positions[b]) <= tx_range:
                g.add_edge(a, b)
    return g


# -- traffic ----------------------------------------------------------------

def test_cbr_interval():
    assert CbrFlow(0, 0, 4).interval == pytest.approx(0.04096)
    assert CbrFlow(0, 0, 4).interval_us == 40960
    assert CbrFlow(0, 0, 4, bit_rate=None, packet_rate=10).interval_us == 100_000


def test_cbr_flow_validation():
    with pytest.raises(ValueError):
        CbrFlow(0, 1, 1)
    with pytest.raises(ValueError):
        CbrFlow(0, 0, 1, bit_rate=None, packet_rate=None)


def test_cbr_source_emission_count():
    sim = Simulator()
    got = []
    ids = iter(range(1, 10_000))
    flow = CbrFlow(0, 0, 4, bit_rate=None, packet_rate=10, start=10.0, stop=20.0)
    CbrSource(sim, flow, got.append, lambda: next(ids)).start()
    sim.run_until(to_us(30))
    assert len(got) == 101
    assert got[0].emit_time == to_us(10) and got[-1].emit_time == to_us(20)


def test_cbr_source_silent_while_dead():
    sim = Simulator()
    got = []
    ids = iter(range(1, 10_000))
    flow = CbrFlow(0, 0, 4, bit_rate=None, packet_rate=10, start=10.0, stop=20.0)
    CbrSource(sim, flow, got.append, lambda: next(ids), alive=lambda n: False).start()
    sim.run_until(to_us(30))
    assert got == []


def test_ledger_conservation_and_double_accounting():
    led = TrafficLedger()
    packets = [DataPacket(i, 0, 0, 4, 0) for i in range(1, 6)]
    for p in packets:
        led.generate(p)
    led.sink_receive(packets[0], 3000)
    led.record_drop(packets[1], 2, "no-route", 10)
    assert led.conserved()
    assert led.generated == 5 and led.delivered == 1 and led.dropped == 1
    assert led.in_flight == {3, 4, 5}
    assert led.delay_sum_us == 3000
    with pytest.raises(AccountingError):
        led.sink_receive(packets[0], 4000)
    with pytest.raises(AccountingError):
        led.record_drop(packets[1], 2, "no-route", 10)
    with pytest.raises(AccountingError):
        led.generate(packets[2])
    with pytest.raises(ValueError):
        led.record_drop(packets[2], 2, "lost-in-space", 10)


@settings(max_examples=200)
@given(st.lists(st.sampled_from(["deliver", "drop", "keep"]), max_size=50))
def test_ledger_conserved_for_any_outcome_mix(outcomes):
    led = TrafficLedger()
    for i, outcome in enumerate(outcomes, start=1):
        p = DataPacket(i, 0, 0, 1, 0)
        led.generate(p)
        if outcome == "deliver":
            led.sink_receive(p, 5)
        elif outcome == "drop":
            led.record_drop(p, 0, "tx-failure", 5)
    assert led.conserved()
    assert led.generated == led.delivered + led.dropped + len(led.in_flight)


# -- dual chain ---------------------------------------------------------------

def test_small_dual_chain_adjacency():
    layout = dual_chain_layout(3)
    g = unit_disk(layout.positions)
    assert sorted(g.nodes) == list(range(8))
    assert set(g[2]) == {1, 3}
    assert set(g[0]) == {1, 5}
    assert set(g[4]) == {3, 7}
    assert {frozenset(e) for e in g.edges} == layout.edges()
    assert layout.upper_path() == [0, 1, 2, 3, 4]
    assert layout.lower_path() == [0, 5, 6, 7, 4]
    verify_dual_chain(layout, 60.0)


def test_long_dual_chain_has_exactly_two_disjoint_paths():
    layout = dual_chain_layout(9)
    g = unit_disk(layout.positions)
    assert g.number_of_nodes() == 20
    assert layout.destination == 10
    assert nx.node_connectivity(g, 0, 10) == 2
    assert sorted(len(p) for p in nx.all_simple_paths(g, 0, 10)) == [11, 11]
    verify_dual_chain(layout, 60.0)


def test_chain_spacing_and_area():
    layout = dual_chain_layout(3)
    for path in (layout.upper_path(), layout.lower_path()):
        for a, b in zip(path, path[1:]):
            assert math.dist(layout.positions[a], layout.positions[b]) == pytest.approx(50.0, abs=1e-5)
    assert all(0 <= c <= 150 for xy in layout.positions.values() for c in xy)


def test_layout_rejected_under_too_large_range():
    with pytest.raises(LayoutError):
        verify_dual_chain(dual_chain_layout(3), 120.0)
    with pytest.raises(LayoutError):
        dual_chain_layout(0)


# -- random waypoint ----------------------------------------------------------

def make_rwp(speed=5.0, pause=0.0, nodes=10, seed=1):
    cfg = RwpConfig(1000.0, 1000.0, speed, speed, pause)
    return RandomWaypoint(cfg, range(nodes), lambda n: random.Random(seed * 1000 + n))


def test_rwp_stays_in_area_and_hits_waypoints():
    rwp = make_rwp()
    for node in range(10):
        for t0, t1, p0, p1 in rwp.legs(node, to_us(200)):
            assert 0 <= p1[0] <= 1000 and 0 <= p1[1] <= 1000
            x, y = rwp.position(node, t1)
            assert (x, y) == pytest.approx(p1)
        for t in range(0, 200, 7):
            x, y = rwp.position(node, to_us(t))
            assert 0 <= x <= 1000 and 0 <= y <= 1000


@pytest.mark.parametrize("speed", [1.0, 4.0, 10.0])
def test_rwp_mean_speed_matches_config(speed):
    rwp = make_rwp(speed)
    for node in range(10):
        for t0, t1, p0, p1 in rwp.legs(node, to_us(200)):
            assert math.dist(p0, p1) / ((t1 - t0) / 1e6) == pytest.approx(speed, rel=1e-3)


def test_rwp_pause_holds_position():
    rwp = make_rwp(pause=3.0)
    t0, t1, p0, p1 = rwp.legs(0, 0)[0]
    assert rwp.position(0, t1 + to_us(1.5)) == pytest.approx(p1)


def test_rwp_snapshot_matches_per_node_position():
    a = make_rwp(seed=4)
    b = make_rwp(seed=4)
    for t in range(0, 300, 13):
        snap = a.snapshot(to_us(t))
        for node in range(10):
            assert tuple(snap[node]) == pytest.approx(b.position(node, to_us(t)))


def test_rwp_config_validation():
    with pytest.raises(ValueError):
        RwpConfig(speed_min=0.0)
    with pytest.raises(ValueError):
        RwpConfig(speed_min=5.0, speed_max=1.0)
    with pytest.raises(ValueError):
        RwpConfig(pause=-1.0)

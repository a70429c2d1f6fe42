import pytest

from olsrsim.kernel import Simulator, to_us
from olsrsim.medium import Medium, MediumConfig, StaticPositions
from olsrsim.mobility import dual_chain_layout
from olsrsim.mpolsr import MultipathCostConfig
from olsrsim.network import Network
from olsrsim.olsr import ProtocolConfig
from olsrsim.recovery import RecoveryConfig


def build_network(positions, protocol="olsr", scheme="none", seed=1, tx_range=60.0,
                  olsr=None, mpolsr=None, trace=None):
    sim = Simulator(seed, trace)
    medium = Medium(sim, MediumConfig(tx_range=tx_range), StaticPositions(positions), sorted(positions))
    net = Network(
        sim, medium, protocol,
        olsr or ProtocolConfig(),
        mpolsr or MultipathCostConfig(),
        RecoveryConfig(scheme),
    )
    net.start()
    return sim, medium, net


def chain(protocol="olsr", scheme="none", seed=1, p=3, **kw):
    return build_network(dual_chain_layout(p).positions, protocol, scheme, seed, **kw)


def settle(sim, seconds=20.0):
    sim.run_until(to_us(seconds))


@pytest.fixture
def converged_chain():
    sim, medium, net = chain()
    settle(sim)
    return sim, medium, net


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")

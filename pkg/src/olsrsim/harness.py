"""Scenario presets, config parsing, batch execution and CSV output."""

from __future__ import annotations

import csv
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from itertools import product

from .kernel import Simulator, to_s, to_us
from .medium import Medium, MediumConfig, StaticPositions
from .metrics import MetricsRecord, avg_e2e_delay, packet_loss_rate, routing_load
from .mobility import RandomWaypoint, RwpConfig, dual_chain_layout, random_positions, verify_dual_chain
from .mpolsr import MultipathCostConfig
from .network import PROTOCOLS, Network
from .olsr import ProtocolConfig
from .recovery import SCHEMES, RecoveryConfig
from .traffic import CbrFlow, CbrSource


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TopologyConfig:
    intermediates: int = 3
    tx_range: float = 60.0
    per_hop_delay: float = 0.002
    nodes: int = 50
    width: float = 1000.0
    height: float = 1000.0
    pause: float = 0.0

    def __post_init__(self):
        if self.intermediates < 1:
            raise ValueError("intermediates must be >= 1")
        if self.nodes < 2:
            raise ValueError("nodes must be >= 2")


@dataclass(frozen=True)
class TrafficConfig:
    packet_size: int = 512
    bit_rate: float | None = 100_000.0
    packet_rate: float | None = None
    start: float = 10.0
    flows: int = 1

    def __post_init__(self):
        if self.packet_size <= 0:
            raise ValueError("packet_size must be positive")
        if (self.bit_rate is None) == (self.packet_rate is None):
            raise ValueError("set exactly one of bit_rate or packet_rate")
        if self.flows < 1:
            raise ValueError("flows must be >= 1")


@dataclass(frozen=True)
class ScenarioSpec:
    preset: int
    protocol: str = "olsr"
    recovery: RecoveryConfig = RecoveryConfig()
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    t_f: tuple[float, ...] = ()
    n: tuple[int, ...] = ()
    speeds: tuple[float, ...] = ()
    duration: float = 50.0
    olsr: ProtocolConfig = ProtocolConfig()
    mpolsr: MultipathCostConfig = MultipathCostConfig()
    topology: TopologyConfig = TopologyConfig()
    traffic: TrafficConfig = TrafficConfig()
    trace: bool = False

    def __post_init__(self):
        if self.preset not in (1, 2, 3):
            raise ValueError("preset must be 1, 2 or 3")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}")
        if self.recovery.scheme == "dr" and self.protocol != "mpolsr":
            raise ValueError("recovery dr requires protocol mpolsr")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        for tf in self.t_f:
            if not 0 <= tf < self.duration:
                raise ValueError(f"t_f {tf} outside the run")
        for n in self.n:
            if not 1 <= n < self.topology.intermediates:
                raise ValueError(f"n {n} must lie in 1..{self.topology.intermediates - 1}")
        for v in self.speeds:
            if v <= 0:
                raise ValueError("speeds must be positive")

    @property
    def scheme(self) -> str:
        return self.recovery.scheme

    def combinations(self) -> list[tuple[int, float | None, int | None, float | None]]:
        """(seed, t_f, n, speed) per run, in sorted parameter order."""
        tfs = self.t_f or (None,)
        if self.preset == 1:
            return [(s, tf, None, None) for s, tf in product(self.seeds, tfs)]
        if self.preset == 2:
            return [(s, tf, n, None) for s, n, tf in product(self.seeds, self.n, tfs)]
        return [(s, None, None, v) for s, v in product(self.seeds, self.speeds)]


def preset(number: int, protocol: str = "olsr", scheme: str = "none", **overrides) -> ScenarioSpec:
    """Scenario defaults; keyword overrides replace top-level ScenarioSpec fields."""
    if number == 1:
        base = ScenarioSpec(1, protocol, RecoveryConfig(scheme), duration=50.0,
                            topology=TopologyConfig(intermediates=3, tx_range=60.0))
    elif number == 2:
        base = ScenarioSpec(2, protocol, RecoveryConfig(scheme), duration=100.0,
                            t_f=tuple(float(t) for t in range(20, 26)), n=tuple(range(2, 9)),
                            topology=TopologyConfig(intermediates=9, tx_range=60.0))
    elif number == 3:
        base = ScenarioSpec(3, protocol, RecoveryConfig(scheme), duration=200.0,
                            speeds=tuple(float(v) for v in range(1, 11)),
                            topology=TopologyConfig(tx_range=250.0, nodes=50),
                            traffic=TrafficConfig(bit_rate=None, packet_rate=10.0, flows=10))
    else:
        raise ValueError("preset must be 1, 2 or 3")
    return replace(base, **overrides) if overrides else base


# -- single run ---------------------------------------------------------------


@dataclass
class RunResult:
    scenario: int
    protocol: str
    recovery: str
    seed: int
    t_f: float | None
    n: int | None
    speed: float | None
    metrics: MetricsRecord
    deltas: list[float]
    conserved: bool
    in_flight: int
    layout: dict = field(default_factory=dict)
    trace: list[str] | None = None

    @property
    def loss_pct(self) -> float:
        return packet_loss_rate(self.metrics)[0]

    @property
    def routing_load_pct(self) -> float:
        return routing_load(self.metrics)[0]

    @property
    def avg_delay_s(self) -> float:
        return avg_e2e_delay(self.metrics)[0]

    def key(self):
        return (self.scenario, self.protocol, self.recovery, self.seed,
                _num(self.t_f), _num(self.n), _num(self.speed))


def _num(x):
    return -1 if x is None else x


def run_scenario(spec: ScenarioSpec, seed: int, t_f: float | None = None,
                 n: int | None = None, speed: float | None = None) -> RunResult:
    sim = Simulator(seed=seed, trace=[] if spec.trace else None)
    topo = spec.topology
    mcfg = MediumConfig(tx_range=topo.tx_range, per_hop_delay=topo.per_hop_delay)
    layout: dict = {}
    failure = None
    if spec.preset in (1, 2):
        chain = dual_chain_layout(topo.intermediates)
        verify_dual_chain(chain, topo.tx_range)
        medium = Medium(sim, mcfg, StaticPositions(chain.positions), chain.nodes)
        flows = [(chain.source, chain.destination)]
        layout = {"positions": chain.positions}
        if spec.preset == 1:
            if t_f is None:
                t_f = to_s(to_us(sim.stream("failure-time").uniform(15.0, 19.0)))
            failure = (2, 3)
        else:
            if n is None:
                raise ValueError("scenario 2 needs a failure depth n")
            if t_f is None:
                raise ValueError("scenario 2 needs a failure time")
            failure = n + 1
    else:
        if speed is None:
            raise ValueError("scenario 3 needs a speed")
        nodes = list(range(topo.nodes))
        rwp = RandomWaypoint(
            RwpConfig(topo.width, topo.height, speed, speed, topo.pause), nodes,
            lambda node: sim.stream(node, "rwp"),
        )
        medium = Medium(sim, mcfg, rwp, nodes, static=False)
        flows = _random_pairs(sim.stream("flows"), nodes, spec.traffic.flows)
        layout = {"initial": {v: rwp.initial_position(v) for v in nodes}}
    layout["flows"] = flows

    net = Network(sim, medium, spec.protocol, spec.olsr, spec.mpolsr, spec.recovery)
    net.start()
    tr = spec.traffic
    for i, (src, dst) in enumerate(flows):
        net.add_flow(src, dst)
        flow = CbrFlow(i, src, dst, tr.packet_size, tr.bit_rate, tr.packet_rate, tr.start, spec.duration)
        CbrSource(sim, flow, net.originate, net.next_packet_id, medium.alive).start()
    if failure is not None:
        medium.inject_failure(failure, to_us(t_f))
        layout["failure"] = failure
    sim.run_until(to_us(spec.duration))

    record = net.metrics()
    deltas = [r.delta for r in record.latencies if r.complete]
    return RunResult(
        spec.preset, spec.protocol, spec.scheme, seed, t_f, n, speed, record, deltas,
        net.ledger.conserved(), len(net.ledger.in_flight), layout,
        sim.trace if spec.trace else None,
    )


def _random_pairs(rng, nodes, count):
    pairs = []
    while len(pairs) < count:
        s, d = rng.sample(nodes, 2)
        if (s, d) not in pairs:
            pairs.append((s, d))
    return pairs


def _run_one(args):
    spec, combo = args
    try:
        return run_scenario(spec, *combo)
    except Exception as exc:
        raise RuntimeError(f"run seed={combo[0]} t_f={combo[1]} n={combo[2]} speed={combo[3]} failed: {exc}") from exc


def run_batch(spec: ScenarioSpec, jobs: int = 1) -> list[RunResult]:
    combos = spec.combinations()
    if jobs > 1 and len(combos) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, [(spec, c) for c in combos]))
    else:
        results = [_run_one((spec, c)) for c in combos]
    return sorted(results, key=RunResult.key)


# -- output -------------------------------------------------------------------

RUN_COLUMNS = ["scenario", "protocol", "recovery", "seed", "t_f", "n", "speed",
               "latency_min", "latency_mean", "latency_max",
               "loss_pct", "routing_load_pct", "avg_delay_s"]
METRICS = ["latency", "loss_pct", "routing_load_pct", "avg_delay_s"]
SUMMARY_COLUMNS = ["scenario", "protocol", "recovery", "n", "speed", "runs"] + [
    f"{m}_{s}" for m in METRICS for s in ("min", "mean", "max")
]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _stats(values):
    if not values:
        return [None, None, None]
    return [min(values), statistics.fmean(values), max(values)]


def run_rows(results: list[RunResult]) -> list[list[str]]:
    rows = []
    for r in sorted(results, key=RunResult.key):
        rows.append([_fmt(v) for v in (
            r.scenario, r.protocol, r.recovery, r.seed, r.t_f, r.n, r.speed,
            *_stats(r.deltas), r.loss_pct, r.routing_load_pct, r.avg_delay_s,
        )])
    return rows


def summary_rows(results: list[RunResult]) -> list[list[str]]:
    groups: dict[tuple, list[RunResult]] = {}
    for r in results:
        key = (r.scenario, r.protocol, r.recovery, _num(r.n), _num(r.speed))
        groups.setdefault(key, []).append(r)
    rows = []
    for key in sorted(groups):
        rs = groups[key]
        first = rs[0]
        values = [
            [d for r in rs for d in r.deltas],
            [r.loss_pct for r in rs],
            [r.routing_load_pct for r in rs],
            [r.avg_delay_s for r in rs if r.metrics.data_delivered],
        ]
        cells = [first.scenario, first.protocol, first.recovery, first.n, first.speed, len(rs)]
        for vals in values:
            cells.extend(_stats([float(v) for v in vals]))
        rows.append([_fmt(c) for c in cells])
    return rows


def write_results(results: list[RunResult], out_dir: str) -> tuple[str, str]:
    try:
        os.makedirs(out_dir, exist_ok=True)
        runs_path = os.path.join(out_dir, "runs.csv")
        summary_path = os.path.join(out_dir, "summary.csv")
        for path, header, rows in (
            (runs_path, RUN_COLUMNS, run_rows(results)),
            (summary_path, SUMMARY_COLUMNS, summary_rows(results)),
        ):
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(rows)
        for r in results:
            if r.trace is not None:
                name = f"trace_{r.protocol}_{r.recovery}_s{r.seed}_tf{_fmt(r.t_f)}_n{_fmt(r.n)}_v{_fmt(r.speed)}.tsv"
                with open(os.path.join(out_dir, name), "w") as fh:
                    fh.write("\n".join(r.trace) + ("\n" if r.trace else ""))
    except OSError as exc:
        raise OSError(f"cannot write results to {out_dir}: {exc}") from exc
    return runs_path, summary_path


# -- config files -------------------------------------------------------------


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_range(text: str, conv=int) -> tuple:
    """'1..5' or '1,3,7' (or a mix) into a tuple."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError(f"empty range {part!r}")
            out.extend(conv(v) for v in range(lo_i, hi_i + 1))
        else:
            out.append(conv(part))
    if not out:
        raise ValueError("empty list")
    return tuple(out)


def _opt_float(text: str):
    return None if text.lower() in ("", "none") else float(text)


_KEYS = {
    "run": {
        "preset": int, "protocol": str, "recovery": str, "seeds": parse_range,
        "tf": lambda t: parse_range(t, float) if ".." in t else tuple(float(x) for x in t.split(",")),
        "n": parse_range, "speeds": lambda t: parse_range(t, float) if ".." in t else tuple(float(x) for x in t.split(",")),
        "duration": float, "trace": _parse_bool,
    },
    "olsr": {f.name: (_parse_bool if f.type in (bool, "bool") else float) for f in fields(ProtocolConfig)},
    "mpolsr": {"k": int, "disjointness_mode": str, "node_penalty_factor": float, "edge_penalty_factor": float},
    "recovery": {"scheme": str, "fast_tc_interval": float},
    "topology": {"intermediates": int, "tx_range": float, "per_hop_delay": float, "nodes": int,
                 "width": float, "height": float, "pause": float},
    "traffic": {"packet_size": int, "bit_rate": _opt_float, "packet_rate": _opt_float,
                "start": float, "flows": int},
}


def _tokens(line: str):
    """Split ``a=1 b = 2`` style content into (key, value) pairs."""
    if line.count("=") == 1:
        key, value = line.split("=", 1)
        return [(key.strip(), value.strip())]
    pairs = []
    for tok in line.split():
        if "=" not in tok:
            raise ValueError(f"expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_config(text: str, base: ScenarioSpec | None = None) -> ScenarioSpec:
    """Parse a sectioned key=value config into a validated ScenarioSpec.

    Keys before any section header belong to ``[run]``. Every error names the
    offending key and its line number.
    """
    section = "run"
    values: dict[str, dict[str, object]] = {s: {} for s in _KEYS}
    lines: dict[tuple[str, str], int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"line {lineno}: malformed section header {line!r}")
            section = line[1:-1].strip()
            if section not in _KEYS:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        try:
            pairs = _tokens(line)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        for key, value in pairs:
            if key not in _KEYS[section]:
                raise ConfigError(f"line {lineno}: unknown key '{key}' in [{section}]")
            try:
                values[section][key] = _KEYS[section][key](value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: key '{key}': invalid value {value!r} ({exc})") from None
            lines[(section, key)] = lineno

    def fail(exc: Exception, candidates) -> ConfigError:
        msg = str(exc)
        named = [c for c in candidates if c in lines and c[1] in msg]
        where = named[0] if named else next((c for c in candidates if c in lines), None)
        if where is None:
            return ConfigError(f"{msg}")
        return ConfigError(f"line {lines[where]}: key '{where[1]}': {msg}")

    run = values["run"]
    try:
        number = int(run.get("preset", base.preset if base else 1))
        protocol = str(run.get("protocol", base.protocol if base else "olsr"))
        scheme = str(values["recovery"].get("scheme", run.get("recovery", base.scheme if base else "none")))
        spec = base if base is not None else preset(number, protocol, scheme)
        if base is None and number != spec.preset:
            spec = preset(number, protocol, scheme)
    except ValueError as exc:
        raise fail(exc, [("run", "preset"), ("run", "protocol"), ("run", "recovery"), ("recovery", "scheme")])

    def build(section, cls, current):
        if not values[section]:
            return current
        try:
            return replace(current, **values[section])
        except (ValueError, TypeError) as exc:
            raise fail(exc, [(section, k) for k in values[section]])

    olsr = build("olsr", ProtocolConfig, spec.olsr)
    mpolsr = build("mpolsr", MultipathCostConfig, spec.mpolsr)
    topology = build("topology", TopologyConfig, spec.topology)
    traffic = build("traffic", TrafficConfig, spec.traffic)
    rec_values = dict(values["recovery"])
    if "recovery" in run:
        rec_values.setdefault("scheme", run["recovery"])
    try:
        recovery = replace(spec.recovery, **rec_values)
    except ValueError as exc:
        raise fail(exc, [("recovery", "scheme"), ("run", "recovery"), ("recovery", "fast_tc_interval")])

    updates = dict(protocol=protocol, recovery=recovery, olsr=olsr, mpolsr=mpolsr,
                   topology=topology, traffic=traffic)
    for key, attr in (("seeds", "seeds"), ("tf", "t_f"), ("n", "n"), ("speeds", "speeds"),
                      ("duration", "duration"), ("trace", "trace")):
        if key in run:
            updates[attr] = run[key]
    try:
        return replace(spec, **updates)
    except ValueError as exc:
        order = [("run", "recovery"), ("recovery", "scheme"), ("run", "protocol")]
        order += [("run", k) for k in ("tf", "n", "speeds", "seeds", "duration", "preset")]
        raise fail(exc, order)

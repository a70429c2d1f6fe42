import csv
import filecmp

import pytest

from olsrsim.cli import main
from olsrsim.harness import (
    RUN_COLUMNS,
    SUMMARY_COLUMNS,
    ConfigError,
    parse_config,
    parse_range,
    preset,
    run_batch,
    run_scenario,
    write_results,
)
from olsrsim.kernel import to_us


def test_parse_range():
    assert parse_range("1..5") == (1, 2, 3, 4, 5)
    assert parse_range("1,4,9") == (1, 4, 9)
    assert parse_range("1..2,7") == (1, 2, 7)
    with pytest.raises(ValueError):
        parse_range("5..1")


def test_presets():
    s1 = preset(1)
    assert s1.duration == 50.0 and s1.topology.intermediates == 3 and len(s1.seeds) == 5
    s2 = preset(2)
    assert s2.duration == 100.0 and s2.t_f == (20.0, 21.0, 22.0, 23.0, 24.0, 25.0)
    assert s2.n == tuple(range(2, 9)) and s2.topology.intermediates == 9
    s3 = preset(3)
    assert s3.duration == 200.0 and s3.topology.nodes == 50 and s3.traffic.flows == 10
    assert s3.speeds == tuple(float(v) for v in range(1, 11))
    with pytest.raises(ValueError):
        preset(4)


def test_config_scenario1_five_runs():
    spec = parse_config("preset=1 protocol=olsr recovery=none seeds=1..5")
    assert spec.preset == 1 and spec.protocol == "olsr" and spec.scheme == "none"
    assert len(spec.combinations()) == 5


def test_config_scenario2_depth():
    spec = parse_config("preset=2 n=8 recovery=ftc")
    assert spec.n == (8,) and spec.scheme == "ftc"
    assert spec.topology.intermediates == 9
    assert all(c[2] == 8 for c in spec.combinations())


def test_config_rejects_dr_with_olsr():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("recovery=dr protocol=olsr")


def test_config_sections_and_comments():
    text = """
    # scenario one, faster hellos
    [run]
    preset = 1
    seeds = 2,3
    [olsr]
    hello_interval = 1.0   ; seconds
    neighb_hold_time = 3.0
    lln_enabled = false
    [recovery]
    scheme = re
    fast_tc_interval = 0.25
    """
    spec = parse_config(text)
    assert spec.seeds == (2, 3)
    assert spec.olsr.hello_interval == 1.0 and not spec.olsr.lln_enabled
    assert spec.recovery.scheme == "re" and spec.recovery.fast_tc_interval == 0.25


@pytest.mark.parametrize("text, line, key", [
    ("preset=1\nbogus=3", 2, "bogus"),
    ("preset=1\n[olsr]\nhello_interval=abc", 3, "hello_interval"),
    ("preset=1\n\n[olsr]\nneighb_hold_time=1.0", 4, "neighb_hold_time"),
    ("preset=2\nn=12", 2, "n"),
])
def test_config_errors_name_line_and_key(text, line, key):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert f"line {line}" in str(err.value)
    assert key in str(err.value)


def test_config_unknown_section():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("preset=1\n[wifi]\nrate=11")


def test_empty_results_write_header_only(tmp_path):
    runs, summary = write_results([], str(tmp_path))
    assert open(runs).read() == ",".join(RUN_COLUMNS) + "\n"
    assert open(summary).read() == ",".join(SUMMARY_COLUMNS) + "\n"


def test_csv_rows_and_formatting(tmp_path):
    results = run_batch(preset(1, seeds=(1, 2)))
    runs, summary = write_results(results, str(tmp_path))
    rows = list(csv.DictReader(open(runs)))
    assert [r["seed"] for r in rows] == ["1", "2"]
    for r in rows:
        assert r["loss_pct"].count(".") == 1 and len(r["loss_pct"].split(".")[1]) == 6
        assert 4.0 <= float(r["latency_min"]) <= 15.2
    groups = list(csv.DictReader(open(summary)))
    assert len(groups) == 1 and groups[0]["runs"] == "2"


def test_batch_output_is_byte_identical(tmp_path):
    spec = preset(1, seeds=(3,), trace=True)
    write_results(run_batch(spec), str(tmp_path / "a"))
    write_results(run_batch(spec), str(tmp_path / "b"))
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert any(n.startswith("trace_") for n in names)
    match, mismatch, errors = filecmp.cmpfiles(tmp_path / "a", tmp_path / "b", names, shallow=False)
    assert mismatch == [] and errors == []


def test_pre_failure_traces_identical_across_schemes():
    t_f = 17.0
    cut = to_us(t_f)

    def prefix(protocol, scheme):
        r = run_scenario(preset(1, protocol, scheme, trace=True), 4, t_f=t_f)
        return [line for line in r.trace if int(line.split("\t", 1)[0]) < cut]

    base = prefix("olsr", "none")
    assert len(base) > 100
    assert prefix("olsr", "re") == base
    assert prefix("olsr", "ftc") == base
    mp = prefix("mpolsr", "none")
    for scheme in ("re", "ftc", "dr"):
        assert prefix("mpolsr", scheme) == mp


def test_every_run_conserves_packets():
    for protocol, scheme in (("olsr", "none"), ("olsr", "re"), ("mpolsr", "ftc"), ("mpolsr", "dr")):
        for r in run_batch(preset(1, protocol, scheme, seeds=(1, 2))):
            assert r.conserved
            m = r.metrics
            assert m.data_generated == m.data_delivered + m.data_dropped + r.in_flight


def test_parallel_batch_matches_serial():
    spec = preset(1, "mpolsr", "re", seeds=(1, 2, 3))
    a = [(r.key(), r.loss_pct, r.deltas) for r in run_batch(spec, jobs=1)]
    b = [(r.key(), r.loss_pct, r.deltas) for r in run_batch(spec, jobs=2)]
    assert a == b


# -- cli --------------------------------------------------------------------

def test_cli_success(tmp_path, capsys):
    code = main(["--preset", "1", "--seeds", "1..2", "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "runs.csv").exists() and (tmp_path / "summary.csv").exists()
    assert capsys.readouterr().out.startswith(",".join(SUMMARY_COLUMNS))


def test_cli_repeatable_options(tmp_path):
    code = main(["--preset", "2", "--protocol", "mpolsr", "--recovery", "dr", "--seeds", "1",
                 "--tf", "20", "--tf", "21", "--n", "3", "--out", str(tmp_path)])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "runs.csv")))
    assert [(r["t_f"], r["n"]) for r in rows] == [("20.000000", "3"), ("21.000000", "3")]


def test_cli_validation_errors(tmp_path, capsys):
    assert main(["--preset", "1", "--protocol", "olsr", "--recovery", "dr", "--out", str(tmp_path)]) == 2
    assert main(["--out", str(tmp_path)]) == 2
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("preset=1\nwhatever=2\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_cli_config_file(tmp_path):
    cfg = tmp_path / "s1.cfg"
    cfg.write_text("preset=1\nprotocol=mpolsr\nseeds=5\n[recovery]\nscheme=re\n")
    assert main(["--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "out" / "runs.csv")))
    assert [(r["protocol"], r["recovery"], r["seed"]) for r in rows] == [("mpolsr", "re", "5")]


def test_cli_run_failure_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["--preset", "1", "--seeds", "1", "--out", str(blocker / "sub")]) == 1

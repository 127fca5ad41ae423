import json

import numpy as np
import pytest
from click.testing import CliRunner

from amerbound import bound, cli, instances


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


def _surface_file(tmp_path, name="sec26", mangle=None):
    s = instances.get(name).surface
    doc = {"s0": s.s0, "strikes": list(s.strikes),
           "maturities": list(s.maturities), "calls": s.prices.tolist()}
    if mangle:
        mangle(doc)
    path = tmp_path / ("%s.json" % name)
    path.write_text(json.dumps(doc))
    return str(path)


PAYOFF = '{"type": "example", "name": "sec26"}'


def test_validate_ok(runner, tmp_path):
    res = runner.invoke(cli.main, ["validate", "--input",
                                   _surface_file(tmp_path)])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["status"] == "weakly-valid"
    assert doc["zero_tail"] is True


def test_validate_invalid_exit_3(runner, tmp_path):
    def mangle(doc):
        doc["calls"][2][2] += 1.0     # convexity violation in tight column
    res = runner.invoke(cli.main, ["validate", "--input",
                                   _surface_file(tmp_path, mangle=mangle)])
    assert res.exit_code == 3
    assert json.loads(res.output)["status"] == "invalid"


def test_parse_error_exit_2(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    res = runner.invoke(cli.main, ["validate", "--input", str(bad)])
    assert res.exit_code == 2


def test_bad_payoff_spec_exit_2(runner, tmp_path):
    res = runner.invoke(cli.main, ["bound", "--input",
                                   _surface_file(tmp_path),
                                   "--payoff", '{"type": "put"}'])
    assert res.exit_code == 2


def test_solver_failure_exit_4(runner, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise bound.BoundError("forced failure")
    monkeypatch.setattr(bound, "robust_bound", boom)
    res = runner.invoke(cli.main, ["bound", "--input",
                                   _surface_file(tmp_path),
                                   "--payoff", PAYOFF])
    assert res.exit_code == 4


def test_gap_failure_exit_5(runner, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise bound.GapError(1.0, 2.0, 1e-6)
    monkeypatch.setattr(bound, "robust_bound", boom)
    res = runner.invoke(cli.main, ["bound", "--input",
                                   _surface_file(tmp_path),
                                   "--payoff", PAYOFF])
    assert res.exit_code == 5


def test_bound_report_contents(runner, tmp_path):
    res = runner.invoke(cli.main, ["bound", "--input",
                                   _surface_file(tmp_path),
                                   "--payoff", PAYOFF])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["phi"] == pytest.approx(35.625, abs=1e-8)
    assert doc["psi"] == pytest.approx(35.625, abs=1e-8)
    assert set(doc["model"]) == {"F", "G1", "G2", "q"}
    assert set(doc["hedge"]) == {"E1", "E2", "D1", "D2", "V", "tail"}


def test_artifacts_byte_identical(runner, tmp_path):
    surface = _surface_file(tmp_path)
    outs = []
    for i in (1, 2):
        out = tmp_path / ("run%d.json" % i)
        res = runner.invoke(cli.main, ["bound", "--input", surface,
                                       "--payoff", PAYOFF,
                                       "--out", str(out)])
        assert res.exit_code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_report_sorted_keys_and_digits():
    text = cli.emit_report({"b": 1 / 3, "a": {"z": 2.0, "y": True}},
                           out=None, fmt="json")
    doc = json.loads(text)
    assert list(doc) == ["a", "b"]
    assert doc["b"] == 0.333333333333          # 12 significant digits
    assert doc["a"]["y"] is True


def test_simulate_reports_estimate(runner, tmp_path):
    res = runner.invoke(cli.main, ["simulate", "--input",
                                   _surface_file(tmp_path),
                                   "--payoff", PAYOFF,
                                   "--trials", "20000", "--seed", "4"])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert abs(doc["estimate"] - doc["phi"]) <= 4 * doc["stderr"]


def test_certify_command(runner, tmp_path):
    res = runner.invoke(cli.main, ["certify", "--input",
                                   _surface_file(tmp_path),
                                   "--payoff", PAYOFF,
                                   "--trials", "20000"])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["certified"] is True
    assert doc["verification"]["lattice-exhaustive"]["min_slack"] >= -1e-9


def test_demo_commands(runner):
    for name, value in (("sec26", "35.625000"), ("sec52", "3.600000"),
                        ("eg11", "34.000000")):
        res = runner.invoke(cli.main, ["demo", name])
        assert res.exit_code == 0, res.output
        assert value in res.output
        assert res.output.strip().endswith("ok")


def test_grid_payoff_spec(runner, tmp_path):
    inst = instances.get("sec26")
    spec = json.dumps({"type": "grid",
                       "values": inst.payoff.values.tolist()})
    res = runner.invoke(cli.main, ["bound", "--input",
                                   _surface_file(tmp_path),
                                   "--payoff", spec])
    assert res.exit_code == 0
    assert json.loads(res.output)["phi"] == pytest.approx(35.625, abs=1e-8)


def test_put_payoff_spec(runner, tmp_path):
    from amerbound import bench
    cfg = bench.BenchConfig(num_maturities=2, strikes=(80, 100, 120))
    s = bench.bs_surface(cfg)
    doc = {"s0": s.s0, "strikes": list(s.strikes),
           "maturities": list(s.maturities), "calls": s.prices.tolist()}
    path = tmp_path / "bs.json"
    path.write_text(json.dumps(doc))
    res = runner.invoke(cli.main, ["bound", "--input", str(path), "--payoff",
                                   '{"type": "put", "K": 100, "r": 0.05}'])
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert doc["variant"] == "extended"
    assert doc["phi"] >= doc["psi"] - 1e-6

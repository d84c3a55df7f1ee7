import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from netdiff.cli import main
from netdiff.config import ExperimentConfig
from netdiff.gains import GainSet
from netdiff.graph import ring
from netdiff.sim import SimConfig
from netdiff.signals import reference_bank
from netdiff.trigger import Constant, Vanishing


@pytest.fixture
def runner():
    return CliRunner()


# --------------------------------------------------------------------------
# config round trip
# --------------------------------------------------------------------------

def test_experiment_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(ring(5), reference_bank(), GainSet(4.0, 13.0, 1.0, 4.0),
                           Vanishing(0.02, 0.5), SimConfig(dt=1e-3, horizon=2.0, seed=7))
    p = tmp_path / "cfg.json"
    cfg.save(p)
    back = ExperimentConfig.load(p)
    assert back.graph == cfg.graph
    assert back.gains == cfg.gains
    assert back.rule == cfg.rule
    assert back.sim.dt == cfg.sim.dt and back.sim.seed == 7
    ts = np.linspace(0, 1, 5)
    np.testing.assert_allclose(back.bank.evaluate_grid(ts, 1),
                               cfg.bank.evaluate_grid(ts, 1), atol=1e-14)


def test_experiment_config_defaults():
    cfg = ExperimentConfig.from_dict({"graph": "ring:5"})
    assert cfg.graph == ring(5)
    assert cfg.gains is None and cfg.rule is None
    assert cfg.bank.n_agents == 5


# --------------------------------------------------------------------------
# gains subcommand
# --------------------------------------------------------------------------

def test_gains_bounds_only(runner):
    res = runner.invoke(main, ["gains", "--graph", "ring:5", "--k1", "13",
                               "--starts", "4"])
    assert res.exit_code == 0, res.output
    rep = json.loads(res.output)
    assert rep["k1_lower"] == pytest.approx(0.8506508, rel=1e-5)
    assert rep["k0_lower"] > 0 and np.isfinite(rep["k0_lower"])


def test_gains_uncertifiable_pair_exits_1(runner):
    res = runner.invoke(main, ["gains", "--graph", "ring:5", "--k0", "4",
                               "--k1", "13", "--starts", "4", "--no-accuracy"])
    assert res.exit_code == 1
    assert "error:" in res.output


def test_gains_bad_graph_exits_2(runner):
    res = runner.invoke(main, ["gains", "--graph", "ring:2", "--k1", "13"])
    assert res.exit_code == 2


# --------------------------------------------------------------------------
# simulate subcommand
# --------------------------------------------------------------------------

def test_simulate_with_config(runner, tmp_path):
    cfg = ExperimentConfig(ring(5), reference_bank(), GainSet(4.0, 13.0, 1.0, 4.0),
                           Constant(0.05), SimConfig(dt=1e-3, horizon=1.0, seed=0))
    cfg_path = tmp_path / "cfg.json"
    cfg.save(cfg_path)
    out = tmp_path / "out"
    res = runner.invoke(main, ["simulate", "--config", str(cfg_path),
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert (out / "trace_run.csv").exists()
    assert (out / "events_run.csv").exists()
    assert (out / "config.json").exists()
    metrics = json.loads((out / "metrics.json").read_text())
    assert "steady_state_error" in metrics["run"]
    assert 0 < metrics["run"]["event_fraction"] < 1
    with open(out / "trace_run.csv") as f:
        header = next(csv.reader(f))
    assert header == ["t", "agent", "s_hat0", "s_hat1", "err1"]
    with open(out / "events_run.csv") as f:
        header = next(csv.reader(f))
    assert header == ["edge_i", "edge_j", "t_event"]


def test_simulate_trigger_override_and_lyapunov(runner, tmp_path):
    cfg = ExperimentConfig(ring(5), reference_bank(), GainSet(4.0, 13.0, 1.0, 4.0),
                           None, SimConfig(dt=1e-3, horizon=0.5, seed=0))
    cfg_path = tmp_path / "cfg.json"
    cfg.save(cfg_path)
    out = tmp_path / "out"
    res = runner.invoke(main, ["simulate", "--config", str(cfg_path),
                               "--trigger", "none", "--with-lyapunov",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    with open(out / "trace_run.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["t", "agent", "s_hat0", "s_hat1", "err1", "V"]
    assert rows[1][5] != ""           # V recorded at t = 0
    assert not (out / "events_run.csv").exists()


def test_simulate_fig2_preset(runner, tmp_path):
    out = tmp_path / "fig2"
    # NETDIFF_SEED propagates into the saved configuration
    res = runner.invoke(main, ["simulate", "--preset", "paper-fig2",
                               "--out", str(out)],
                        env={"NETDIFF_SEED": "123"})
    assert res.exit_code == 0, res.output
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) == {"constant", "vanishing", "state_dependent"}
    for name in metrics:
        assert (out / f"trace_{name}.csv").exists()
        assert (out / f"events_{name}.csv").exists()
        assert "inter_event_windows" in metrics[name]
    saved = json.loads((out / "config.json").read_text())
    assert saved["sim"]["seed"] == 123


def test_simulate_requires_config_or_preset(runner, tmp_path):
    res = runner.invoke(main, ["simulate", "--out", str(tmp_path / "x")])
    assert res.exit_code == 2


# --------------------------------------------------------------------------
# sweep subcommand
# --------------------------------------------------------------------------

def test_sweep(runner, tmp_path):
    out = tmp_path / "sweep"
    res = runner.invoke(main, ["sweep", "--deltas", "0.02,0.08", "--reps", "2",
                               "--dt", "1e-3", "--horizon", "1.0",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    with open(out / "sweep.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["delta", "rep", "sse", "event_fraction", "bound"]
    assert len(rows) == 1 + 2 * 2
    with open(out / "summary.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["delta", "max_sse", "mean_event_fraction", "bound"]
    assert len(rows) == 3
    # the recorded bound column is c1 * sqrt(delta)
    assert float(rows[1][3]) == pytest.approx(7.9 * np.sqrt(0.02))


def test_sweep_range_spec(runner, tmp_path):
    out = tmp_path / "sweep2"
    res = runner.invoke(main, ["sweep", "--deltas", "0:0.1:2", "--reps", "1",
                               "--dt", "1e-3", "--horizon", "0.5",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    with open(out / "summary.csv") as f:
        rows = list(csv.reader(f))
    assert [float(r[0]) for r in rows[1:]] == pytest.approx([0.05, 0.1])
    res = runner.invoke(main, ["sweep", "--deltas", "0.1:0.0:2",
                               "--out", str(out)])
    assert res.exit_code == 2


# --------------------------------------------------------------------------
# check subcommand
# --------------------------------------------------------------------------

def test_check_passes(runner):
    res = runner.invoke(main, ["check", "--graph", "ring:5"])
    assert res.exit_code == 0, res.output
    assert "[PASS]" in res.output and "[FAIL]" not in res.output


def test_check_subset_and_unknown(runner):
    res = runner.invoke(main, ["check", "--only", "fenchel", "--only", "euler"])
    assert res.exit_code == 0
    assert res.output.count("[PASS]") == 2
    res = runner.invoke(main, ["check", "--only", "bogus"])
    assert res.exit_code == 2

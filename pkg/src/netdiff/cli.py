"""Command-line interface: gain certification, simulation, sweeps, checks.

Exit codes: 0 success, 1 failed property/certification/runtime error,
2 usage error. NETDIFF_SEED overrides any configured seed.
"""
from __future__ import annotations

import csv
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .checks import REGISTRY, run_checks
from .config import ExperimentConfig
from .gains import (CertificationError, GainSet, OptimizerSettings, certify,
                    k0_lower_bound, k1_lower_bound)
from .graph import GraphError, parse_graph_spec, ring
from .signals import reference_bank
from .sim import (SimConfig, SimulationError, Trace, event_fraction, integrate,
                  lyapunov_monitor, steady_state_error, sweep_delta)
from .trigger import Constant, StateDependent, Vanishing

PAPER_GAINS = dict(k0=4.0, k1=13.0, gamma=1.0, l=4.0)


def _seed_override(seed: int) -> int:
    env = os.environ.get("NETDIFF_SEED")
    return int(env) if env else seed


def _fail(msg: str):
    click.echo(f"error: {msg}", err=True)
    sys.exit(1)


@click.group()
def main():
    """Distributed super-twisting differentiation over networks."""


# --------------------------------------------------------------------------
# gains
# --------------------------------------------------------------------------

@main.command("gains")
@click.option("--graph", "graph_spec", required=True,
              help="generator spec (ring:5, path:3, complete:4) or JSON file")
@click.option("--k0", type=float, default=None, help="certify this full gain pair")
@click.option("--k1", type=float, required=True)
@click.option("--gamma", type=float, default=1.0)
@click.option("--l", type=float, default=4.0, help="signal bound L")
@click.option("--beta", type=float, default=7.0)
@click.option("--seed", type=int, default=0)
@click.option("--no-accuracy", is_flag=True, help="skip the level-set bisection")
@click.option("--starts", type=int, default=32, help="optimizer multi-starts")
def cmd_gains(graph_spec, k0, k1, gamma, l, beta, seed, no_accuracy, starts):
    """Certify gains on a graph; emits a JSON report on stdout."""
    try:
        g = parse_graph_spec(graph_spec)
    except (GraphError, OSError, ValueError) as e:
        raise click.UsageError(str(e))
    seed = _seed_override(seed)
    opts = OptimizerSettings(seed=seed, n_starts=starts)
    try:
        if k0 is None:
            report = {
                "k1_lower": k1_lower_bound(g),
                "k0_lower": k0_lower_bound(g, k1, beta, opts).value,
                "k1": k1, "beta": beta,
            }
        else:
            gains = GainSet(k0, k1, gamma, l, beta)
            report = certify(g, gains, opts, with_accuracy=not no_accuracy).to_dict()
            report["gains"] = gains.to_dict()
    except CertificationError as e:
        _fail(str(e))
    click.echo(json.dumps(report, indent=2))


# --------------------------------------------------------------------------
# simulate
# --------------------------------------------------------------------------

def _write_trace_csv(path: Path, trace: Trace, vs=None, v_idx=None):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = ["t", "agent", "s_hat0", "s_hat1", "err1"]
        if vs is not None:
            header.append("V")
            vmap = dict(zip(v_idx, vs))
        w.writerow(header)
        err = trace.err1
        for k, t in enumerate(trace.t):
            for a in range(trace.graph.n_agents):
                row = [f"{t:.6f}", a + 1, repr(trace.s_hat0[k, a]),
                       repr(trace.s_hat1[k, a]), repr(err[k, a])]
                if vs is not None:
                    row.append(repr(vmap[k]) if k in vmap else "")
                w.writerow(row)


def _write_events_csv(path: Path, trace: Trace):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["edge_i", "edge_j", "t_event"])
        for (i, j), ts in zip(trace.graph.edges, trace.event_times):
            for t in ts:
                w.writerow([i, j, f"{t:.6f}"])


def _window_gap_stats(trace: Trace, width: float = 1.0):
    """Min/median inter-event time per time window (gaps pooled over edges,
    assigned to the window containing the later event)."""
    horizon = trace.config.horizon
    n_win = int(np.ceil(horizon / width))
    gaps_by_win = [[] for _ in range(n_win)]
    for ts in trace.event_times:
        ts = np.asarray(ts)
        for gap, t_late in zip(np.diff(ts), ts[1:]):
            gaps_by_win[min(int(t_late / width), n_win - 1)].append(gap)
    out = []
    for w, gaps in enumerate(gaps_by_win):
        gaps = np.array(gaps)
        out.append({
            "window": [w * width, min((w + 1) * width, horizon)],
            "n_events": int(len(gaps)),
            "min_gap": float(gaps.min()) if len(gaps) else None,
            "median_gap": float(np.median(gaps)) if len(gaps) else None,
        })
    return out


def _run_metrics(trace: Trace, triggered: bool) -> dict:
    m = {"steady_state_error": steady_state_error(trace)}
    if triggered:
        m["event_fraction"] = event_fraction(trace)
        m["inter_event_windows"] = _window_gap_stats(trace)
    return m


def _preset_config(name: str) -> ExperimentConfig:
    gains = GainSet(**PAPER_GAINS)
    sim = SimConfig(dt=1e-4, horizon=10.0, seed=0)
    if name == "paper-fig1":
        return ExperimentConfig(ring(5), reference_bank(), gains,
                                Constant(0.02), sim)
    if name == "paper-fig2":
        # rule is attached per variant in cmd_simulate
        return ExperimentConfig(ring(5), reference_bank(), gains, None, sim)
    raise click.UsageError(f"unknown preset: {name!r}")


_FIG2_VARIANTS = {
    "constant": Constant(0.02),
    "vanishing": Vanishing(0.02, 0.5),
    "state_dependent": StateDependent(0.02, 0.15),
}


@main.command("simulate")
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--preset", type=click.Choice(["paper-fig1", "paper-fig2"]))
@click.option("--trigger", "trigger_kind",
              type=click.Choice(["none", "constant", "vanishing", "state"]),
              default=None, help="override the trigger rule")
@click.option("--delta", type=float, default=0.02)
@click.option("--q", type=float, default=0.5)
@click.option("--sigma", type=float, default=0.15)
@click.option("--seed", type=int, default=None)
@click.option("--with-lyapunov", is_flag=True, help="add a V column (slow)")
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_simulate(config_path, preset, trigger_kind, delta, q, sigma, seed,
                 with_lyapunov, out_dir):
    """Run the protocol and write trace/events CSVs plus metrics JSON."""
    if config_path:
        cfg = ExperimentConfig.load(config_path)
    elif preset:
        cfg = _preset_config(preset)
    else:
        raise click.UsageError("provide --config or --preset")
    if trigger_kind is not None:
        cfg.rule = {"none": None, "constant": Constant(delta),
                    "vanishing": Vanishing(delta, q),
                    "state": StateDependent(delta, sigma)}[trigger_kind]
    if cfg.gains is None:
        cfg.gains = GainSet(**PAPER_GAINS)
    if seed is not None:
        cfg.sim.seed = seed
    cfg.sim.seed = _seed_override(cfg.sim.seed)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    runs = (_FIG2_VARIANTS if preset == "paper-fig2"
            else {"run": cfg.rule})
    metrics = {}
    try:
        for name, rule in runs.items():
            trace = integrate(cfg.graph, cfg.bank, cfg.gains, cfg.sim, rule)
            vs = v_idx = None
            if with_lyapunov:
                v_ts, v_vals = lyapunov_monitor(trace)
                v_idx = [int(round(t / cfg.sim.dt)) for t in v_ts]
                vs = v_vals
            _write_trace_csv(out / f"trace_{name}.csv", trace, vs, v_idx)
            if rule is not None:
                _write_events_csv(out / f"events_{name}.csv", trace)
            metrics[name] = _run_metrics(trace, rule is not None)
    except SimulationError as e:
        _fail(str(e))
    cfg.save(out / "config.json")
    with open(out / "metrics.json", "w") as f:
        json.dump(metrics, f, indent=2)
    click.echo(json.dumps(metrics, indent=2))


# --------------------------------------------------------------------------
# sweep
# --------------------------------------------------------------------------

def _parse_deltas(spec: str):
    """'lo:hi:count' -> count evenly spaced values in (lo, hi]; or a comma
    list of explicit values."""
    if ":" in spec:
        lo, hi, count = spec.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
        if count < 1 or hi <= lo:
            raise click.UsageError(f"bad delta range: {spec!r}")
        return [lo + (hi - lo) * k / count for k in range(1, count + 1)]
    vals = [float(x) for x in spec.split(",") if x.strip()]
    if not vals:
        raise click.UsageError("empty delta list")
    return vals


@main.command("sweep")
@click.option("--graph", "graph_spec", default="ring:5")
@click.option("--deltas", required=True, help="'lo:hi:count' or comma list")
@click.option("--reps", type=int, default=10)
@click.option("--c1", type=float, default=7.9, help="accuracy constant for the bound column")
@click.option("--dt", type=float, default=1e-4)
@click.option("--horizon", type=float, default=10.0)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", required=True, type=click.Path())
def cmd_sweep(graph_spec, deltas, reps, c1, dt, horizon, seed, out_dir):
    """Constant-threshold sweep; writes sweep.csv and summary.csv."""
    try:
        g = parse_graph_spec(graph_spec)
    except (GraphError, OSError, ValueError) as e:
        raise click.UsageError(str(e))
    delta_vals = _parse_deltas(deltas)
    seed = _seed_override(seed)
    base = SimConfig(dt=dt, horizon=horizon, seed=seed)
    try:
        rows = sweep_delta(g, reference_bank(), GainSet(**PAPER_GAINS),
                           delta_vals, reps, base)
    except SimulationError as e:
        _fail(str(e))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["delta", "rep", "sse", "event_fraction", "bound"])
        for r in rows:
            w.writerow([r["delta"], r["rep"], repr(r["sse"]),
                        repr(r["event_fraction"]),
                        repr(float(c1 * np.sqrt(r["delta"])))])
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["delta", "max_sse", "mean_event_fraction", "bound"])
        for d in delta_vals:
            sub = [r for r in rows if r["delta"] == d]
            w.writerow([d, repr(max(r["sse"] for r in sub)),
                        repr(float(np.mean([r["event_fraction"] for r in sub]))),
                        repr(float(c1 * np.sqrt(d)))])
    click.echo(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")


# --------------------------------------------------------------------------
# check
# --------------------------------------------------------------------------

@main.command("check")
@click.option("--graph", "graph_spec", default="ring:5")
@click.option("--only", multiple=True, help="run a subset of checks")
@click.option("--seed", type=int, default=0)
def cmd_check(graph_spec, only, seed):
    """Run the property-check suites; exit 0 iff all pass."""
    try:
        g = parse_graph_spec(graph_spec)
    except (GraphError, OSError, ValueError) as e:
        raise click.UsageError(str(e))
    names = list(only) if only else None
    if names:
        unknown = [n for n in names if n not in REGISTRY]
        if unknown:
            raise click.UsageError(f"unknown checks: {unknown}")
    results = run_checks(g, _seed_override(seed), names)
    ok = True
    for r in results:
        status = "PASS" if r["passed"] else "FAIL"
        click.echo(f"[{status}] {r['name']}: {r['detail']}")
        ok = ok and r["passed"]
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()

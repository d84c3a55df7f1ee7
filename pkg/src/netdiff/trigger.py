"""Event-triggered communication: threshold rules and per-edge channels.

Each undirected edge owns one channel. Between events both endpoints use the
values stored at the last event; an event fires as soon as either endpoint's
current broadcast value deviates from its stored copy by at least the
threshold (>=, so a zero threshold fires every step). Time tau = 0 counts as
the first event on every edge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph


@dataclass(frozen=True)
class Constant:
    """Fixed threshold delta >= 0."""

    delta: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    def value(self, t: float, stored_diff: float) -> float:
        return self.delta

    def to_dict(self) -> dict:
        return {"kind": "constant", "delta": self.delta}


@dataclass(frozen=True)
class Vanishing:
    """Exponentially decaying threshold delta * exp(-q * (t - p))."""

    delta: float
    q: float
    p: float = 0.0

    def __post_init__(self):
        if self.delta < 0 or self.q < 0:
            raise ValueError("delta and q must be >= 0")

    def value(self, t: float, stored_diff: float) -> float:
        return self.delta * np.exp(-self.q * (t - self.p))

    def to_dict(self) -> dict:
        return {"kind": "vanishing", "delta": self.delta, "q": self.q, "p": self.p}


@dataclass(frozen=True)
class StateDependent:
    """delta + sigma * |stored_i - stored_j|: the floor keeps inter-event
    times bounded away from zero, the slope relaxes the threshold while the
    network still disagrees. sigma < 1/2 is a hard validity limit; certified
    accuracy additionally needs sigma <= sigma_max of the gain certificate."""

    delta: float
    sigma: float

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if not (0.0 <= self.sigma < 0.5):
            raise ValueError("sigma must satisfy 0 <= sigma < 1/2")

    def value(self, t: float, stored_diff: float) -> float:
        return self.delta + self.sigma * abs(stored_diff)

    def to_dict(self) -> dict:
        return {"kind": "state_dependent", "delta": self.delta, "sigma": self.sigma}


def rule_from_dict(d: dict):
    kind = d["kind"]
    if kind == "constant":
        return Constant(float(d["delta"]))
    if kind == "vanishing":
        return Vanishing(float(d["delta"]), float(d["q"]), float(d.get("p", 0.0)))
    if kind == "state_dependent":
        return StateDependent(float(d["delta"]), float(d["sigma"]))
    raise ValueError(f"unknown trigger kind: {kind!r}")


class EdgeChannel:
    """Stored broadcast values and event bookkeeping for one edge."""

    def __init__(self, rule):
        self.rule = rule
        self.stored = np.zeros(2)      # [value at endpoint i, at endpoint j]
        self.event_times: list[float] = []

    def threshold(self, t: float) -> float:
        return self.rule.value(t, self.stored[0] - self.stored[1])

    def should_fire(self, t: float, current: np.ndarray) -> bool:
        dev = np.max(np.abs(np.asarray(current, float) - self.stored))
        return bool(dev >= self.threshold(t))

    def fire(self, t: float, current: np.ndarray):
        self.stored = np.array(current, dtype=float)
        self.event_times.append(t)


def make_channels(g: Graph, rule) -> list[EdgeChannel]:
    return [EdgeChannel(rule) for _ in g.edges]


@dataclass
class InterEventStats:
    per_edge_counts: np.ndarray       # events per edge
    per_edge_min: np.ndarray          # min/mean/max inter-event times
    per_edge_mean: np.ndarray
    per_edge_max: np.ndarray
    event_fraction: float             # total events / (E * horizon / dt)


def inter_event_stats(event_times: list[np.ndarray], horizon: float,
                      dt: float) -> InterEventStats:
    """Summary statistics from per-edge event time arrays. Edges with fewer
    than two events report nan gaps."""
    n_edges = len(event_times)
    counts = np.array([len(ts) for ts in event_times])
    mins = np.full(n_edges, np.nan)
    means = np.full(n_edges, np.nan)
    maxs = np.full(n_edges, np.nan)
    for k, ts in enumerate(event_times):
        if len(ts) >= 2:
            gaps = np.diff(np.asarray(ts, float))
            mins[k], means[k], maxs[k] = gaps.min(), gaps.mean(), gaps.max()
    slots = n_edges * round(horizon / dt)
    frac = float(counts.sum() / slots) if slots > 0 else float("nan")
    return InterEventStats(counts, mins, means, maxs, frac)


def windowed_event_counts(event_times: list[np.ndarray], horizon: float,
                          n_windows: int) -> np.ndarray:
    """Total event counts per time window, summed over edges; used to look at
    how communication load evolves along a run."""
    edges = [np.asarray(ts, float) for ts in event_times]
    bins = np.linspace(0.0, horizon, n_windows + 1)
    out = np.zeros(n_windows, dtype=int)
    for ts in edges:
        hist, _ = np.histogram(ts, bins=bins)
        out += hist
    return out

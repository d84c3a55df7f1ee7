"""Per-agent analytic input signals with exact derivatives.

Signals are sums of sinusoids plus a constant offset, so value, first and
second derivatives are closed forms (no numerical differentiation anywhere).
Also hosts the feasibility checker for the disturbance bound that the
protocol gains rely on: for a damping rate gamma there must exist L >= 0
with

    |d2/dt2 (sbar - s_i) + 2*gamma * d/dt (sbar - s_i)
        + gamma^2 * (sbar - s_i)| <= L / sqrt(N)

for every agent i and all t. The checker reports the supremum of the left
hand side over a time grid; it never asserts a particular L is sufficient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Sinusoid:
    amp: float
    omega: float
    phi: float


@dataclass(frozen=True)
class AgentSignal:
    """Sum of sinusoids plus offset; derivatives up to order 2 in closed form."""

    terms: tuple[Sinusoid, ...]
    offset: float = 0.0

    def value(self, t, order: int):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for term in self.terms:
            arg = term.omega * t + term.phi
            w = term.omega
            if order == 0:
                out += term.amp * np.sin(arg)
            elif order == 1:
                out += term.amp * w * np.cos(arg)
            elif order == 2:
                out += -term.amp * w * w * np.sin(arg)
            else:
                raise ValueError(f"order must be 0, 1 or 2, got {order}")
        if order == 0:
            out += self.offset
        return out


@dataclass(frozen=True)
class CallableSignal:
    """Extension hook: arbitrary twice-differentiable signal given as three
    closures. Not covered by the automatic feasibility analysis beyond the
    grid supremum."""

    f0: object
    f1: object
    f2: object

    def value(self, t, order: int):
        f = (self.f0, self.f1, self.f2)[order]
        return np.asarray(f(np.asarray(t, dtype=float)), dtype=float)


@dataclass(frozen=True)
class SignalBank:
    signals: tuple

    @property
    def n_agents(self) -> int:
        return len(self.signals)

    def evaluate(self, t: float, order: int = 0) -> np.ndarray:
        """Vector of per-agent derivatives of the given order at time t."""
        if order not in (0, 1, 2):
            raise ValueError(f"order must be 0, 1 or 2, got {order}")
        return np.array([float(s.value(t, order)) for s in self.signals])

    def evaluate_grid(self, ts: np.ndarray, order: int = 0) -> np.ndarray:
        """(len(ts), N) array of per-agent values; used to precompute
        simulation inputs."""
        ts = np.asarray(ts, dtype=float)
        return np.column_stack([s.value(ts, order) for s in self.signals])

    def average(self, t: float, order: int = 0) -> float:
        """Exact average signal (order 0) or its derivative (order 1)."""
        if order not in (0, 1):
            raise ValueError(f"order must be 0 or 1, got {order}")
        return float(self.evaluate(t, order).mean())

    def to_dict(self) -> dict:
        agents = []
        for s in self.signals:
            if not isinstance(s, AgentSignal):
                raise TypeError("only sinusoid banks are serializable")
            agents.append({
                "terms": [{"amp": x.amp, "omega": x.omega, "phi": x.phi} for x in s.terms],
                "offset": s.offset,
            })
        return {"agents": agents}

    @staticmethod
    def from_dict(d: dict) -> "SignalBank":
        sigs = []
        for a in d["agents"]:
            terms = tuple(Sinusoid(float(x["amp"]), float(x["omega"]), float(x["phi"]))
                          for x in a["terms"])
            sigs.append(AgentSignal(terms, float(a.get("offset", 0.0))))
        return SignalBank(tuple(sigs))


# Five-agent unit-amplitude sinusoid bank used throughout the reference
# experiment: s_i(t) = sin(omega_i t + phi_i).
PAPER_OMEGAS = (1.73, 0.58, 1.12, 0.37, 1.95)
PAPER_PHASES = (0.27, 1.66, 0.09, 1.92, 0.45)


def reference_bank() -> SignalBank:
    return SignalBank(tuple(
        AgentSignal((Sinusoid(1.0, w, p),)) for w, p in zip(PAPER_OMEGAS, PAPER_PHASES)
    ))


@dataclass(frozen=True)
class AssumptionReport:
    gamma: float
    sup_lhs: float
    l_required: float       # sqrt(N) * sup_lhs
    l: float
    satisfied: bool
    t_argmax: float = 0.0
    agent_argmax: int = 0

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "sup_lhs": self.sup_lhs,
            "l_required": self.l_required, "l": self.l,
            "satisfied": self.satisfied, "t_argmax": self.t_argmax,
            "agent_argmax": self.agent_argmax,
        }


def check_assumption(bank: SignalBank, gamma: float, l: float,
                     grid: np.ndarray) -> AssumptionReport:
    """Grid supremum of the per-agent disturbance expression.

    The expression equals |(P z(t))_i| with z = s'' + 2*gamma*s' + gamma^2*s
    and P the consensus projector, since sbar - s_i = -(P z)_i componentwise.
    Uniform-grid maximization is an approximation; spacing <= 1e-3 s is the
    documented default.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty time grid")
    z = (bank.evaluate_grid(grid, 2)
         + 2.0 * gamma * bank.evaluate_grid(grid, 1)
         + gamma ** 2 * bank.evaluate_grid(grid, 0))
    centered = np.abs(z - z.mean(axis=1, keepdims=True))
    k, i = np.unravel_index(np.argmax(centered), centered.shape)
    sup_lhs = float(centered[k, i])
    n = bank.n_agents
    return AssumptionReport(
        gamma=gamma, sup_lhs=sup_lhs, l_required=float(np.sqrt(n) * sup_lhs),
        l=l, satisfied=bool(sup_lhs <= l / np.sqrt(n)),
        t_argmax=float(grid[k]), agent_argmax=int(i) + 1,
    )

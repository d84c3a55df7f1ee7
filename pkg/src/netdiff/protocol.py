"""Right-hand sides and output maps of the distributed differentiator.

The base protocol keeps two internal states per agent (eta0, eta1). Agents
broadcast shat0 = s - eta0; the edge nonlinearity acts on differences of the
broadcast values, which is why the RHS takes the per-edge communicated values
as an explicit argument: the same function serves ideal (instantaneous) and
event-triggered (last-broadcast) operation.

The derivative-free variant appends a virtual state pair per agent and is
equivalent to running the base protocol on the augmented graph in which each
agent is joined to its own virtual node.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import signed_power
from .graph import Graph, consensus_projector, incidence


@dataclass
class ProtocolState:
    eta0: np.ndarray
    eta1: np.ndarray


@dataclass
class VariantState:
    """State of the derivative-free variant: primed (real-node) and unprimed
    (virtual-node) pairs."""

    eta0p: np.ndarray
    eta1p: np.ndarray
    eta0: np.ndarray
    eta1: np.ndarray


@dataclass
class OutputSnapshot:
    s_hat0: np.ndarray   # broadcast estimates
    s_hat1: np.ndarray   # differentiator outputs
    e0: np.ndarray       # consensus errors (projected)
    e1: np.ndarray
    x0: np.ndarray       # scaled abstract state e0/L, e1/(k0 L)
    x1: np.ndarray


def edge_diffs(g: Graph, comm_values: np.ndarray) -> np.ndarray:
    """Per-edge differences value_i - value_j from an (E, 2) array of
    endpoint values (column 0 = lower-indexed endpoint)."""
    comm_values = np.asarray(comm_values, dtype=float)
    if comm_values.shape != (g.n_edges, 2):
        raise ValueError(f"expected ({g.n_edges}, 2) comm values, got {comm_values.shape}")
    return comm_values[:, 0] - comm_values[:, 1]


def ideal_comm_values(g: Graph, s_hat0: np.ndarray) -> np.ndarray:
    """Instantaneous communication: both endpoints see the current outputs."""
    idx_i = np.array([i - 1 for i, _ in g.edges])
    idx_j = np.array([j - 1 for _, j in g.edges])
    return np.column_stack([s_hat0[idx_i], s_hat0[idx_j]])


def redcho_rhs(g: Graph, state: ProtocolState, comm_values: np.ndarray,
               gains) -> ProtocolState:
    """Protocol dynamics evaluated at the given communicated edge values.

    eta0' = k0 sqrt(L) D <diffs>^(1/2) + eta1 - gamma eta0
    eta1' = k1 L       D sign(diffs)   - gamma eta1
    """
    D = incidence(g)
    diffs = edge_diffs(g, comm_values)
    k0, k1, gam, L = gains.k0, gains.k1, gains.gamma, gains.l
    d0 = k0 * np.sqrt(L) * (D @ signed_power(diffs, 0.5)) + state.eta1 - gam * state.eta0
    d1 = k1 * L * (D @ np.sign(diffs)) - gam * state.eta1
    return ProtocolState(d0, d1)


def redcho_outputs(state: ProtocolState, bank, t: float, gains) -> OutputSnapshot:
    """Output maps plus error/abstract coordinate transformations.

    The consensus error e1 is defined through the auxiliary variable
    sdot + gamma*s - eta1 = s_hat1 + gamma*s_hat0, for which the disturbed
    double-integrator error dynamics hold exactly.
    """
    s = bank.evaluate(t, 0)
    sd = bank.evaluate(t, 1)
    gam = gains.gamma
    s_hat0 = s - state.eta0
    s_hat1 = sd - state.eta1 + gam * state.eta0
    P = consensus_projector(len(s))
    e0 = P @ s_hat0
    e1 = P @ (s_hat1 + gam * s_hat0)
    return OutputSnapshot(s_hat0, s_hat1, e0, e1,
                          e0 / gains.l, e1 / (gains.k0 * gains.l))


def error_rhs(g: Graph, e0: np.ndarray, e1: np.ndarray, d: np.ndarray,
              gains) -> tuple[np.ndarray, np.ndarray]:
    """Disturbed consensus-error dynamics.

    e0' = -k0 sqrt(L) D <D.T e0>^(1/2) + e1 - gamma e0
    e1' = -k1 L       D sign(D.T e0)   - gamma e1 + d
    """
    for name, v in (("e0", e0), ("e1", e1), ("d", d)):
        v = np.asarray(v, float)
        if abs(v.mean()) > 1e-8 * max(1.0, np.linalg.norm(v)):
            raise ValueError(f"{name} must be zero-mean")
    D = incidence(g)
    k0, k1, gam, L = gains.k0, gains.k1, gains.gamma, gains.l
    v = D.T @ np.asarray(e0, float)
    de0 = -k0 * np.sqrt(L) * (D @ signed_power(v, 0.5)) + e1 - gam * e0
    de1 = -k1 * L * (D @ np.sign(v)) - gam * e1 + np.asarray(d, float)
    return de0, de1


@lru_cache(maxsize=None)
def augmented_graph(g: Graph) -> Graph:
    """Original graph plus one virtual node per agent, joined to its agent.

    Agent i keeps index i; its virtual node is i + N.
    """
    n = g.n_agents
    edges = list(g.edges) + [(i, i + n) for i in range(1, n + 1)]
    return Graph(2 * n, tuple(sorted(edges)))


def derivative_free_rhs(g: Graph, state: VariantState, comm_values: np.ndarray,
                        gains, s_local: np.ndarray) -> VariantState:
    """Derivative-free variant dynamics.

    comm_values carries the per-edge broadcast values of shat0' = s - eta0';
    the agent/virtual self-coupling always uses the instantaneous local
    difference shat0' - shat0 with shat0 = -eta0. Coincides with the base
    protocol on the augmented graph (exercised by the oracle test).
    """
    D = incidence(g)
    k0, k1, gam, L = gains.k0, gains.k1, gains.gamma, gains.l
    shat0p = np.asarray(s_local, float) - state.eta0p
    shat0 = -state.eta0
    diffs = edge_diffs(g, comm_values)
    dp = shat0p - shat0
    sqL = np.sqrt(L)
    d0p = (k0 * sqL * (D @ signed_power(diffs, 0.5) + signed_power(dp, 0.5))
           + state.eta1p - gam * state.eta0p)
    d1p = k1 * L * (D @ np.sign(diffs) + np.sign(dp)) - gam * state.eta1p
    d0 = -k0 * sqL * signed_power(dp, 0.5) + state.eta1 - gam * state.eta0
    d1 = -k1 * L * np.sign(dp) - gam * state.eta1
    return VariantState(d0p, d1p, d0, d1)


def derivative_free_output(state: VariantState, gains) -> np.ndarray:
    """Differentiator output of the variant: twice the virtual node's output
    (the virtual nodes track half the average since they contribute zero
    signals to the augmented network)."""
    return 2.0 * (gains.gamma * state.eta0 - state.eta1)

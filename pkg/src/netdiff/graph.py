"""Undirected communication graphs and their spectral/incidence quantities.

All downstream modules consume graphs through the incidence matrix D, the
Laplacian D @ D.T and the algebraic connectivity (smallest nonzero Laplacian
eigenvalue). Edge orientation convention: the column of D for edge (i, j)
with i < j carries +1 at row i and -1 at row j. Every formula built on top
pairs D with a function of D.T @ e, so any consistent orientation gives the
same results (covered by a property test).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# "nonzero" eigenvalue means > _EIG_REL_TOL * largest eigenvalue
_EIG_REL_TOL = 1e-9


class GraphError(ValueError):
    """Malformed or disconnected graph."""


@dataclass(frozen=True)
class Graph:
    """Undirected graph on agents 1..n_agents with edges (i, j), i < j."""

    n_agents: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n = self.n_agents
        if n < 1:
            raise GraphError(f"n_agents must be >= 1, got {n}")
        seen = set()
        for (i, j) in self.edges:
            if not (1 <= i <= n and 1 <= j <= n):
                raise GraphError(f"edge ({i},{j}) out of range for {n} agents")
            if i == j:
                raise GraphError(f"self-loop ({i},{j}) not allowed")
            if i > j:
                raise GraphError(f"edge ({i},{j}) must be ordered i < j")
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i},{j})")
            seen.add((i, j))
        if not _is_connected(n, self.edges):
            raise GraphError("graph is disconnected")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def to_dict(self) -> dict:
        return {"n": self.n_agents, "edges": [list(e) for e in self.edges]}

    @staticmethod
    def from_dict(d: dict) -> "Graph":
        edges = tuple(tuple(sorted((int(i), int(j)))) for i, j in d["edges"])
        return Graph(int(d["n"]), edges)

    @staticmethod
    def from_json(path: str) -> "Graph":
        with open(path) as f:
            return Graph.from_dict(json.load(f))


def _is_connected(n: int, edges) -> bool:
    if n == 1:
        return True
    adj = {i: [] for i in range(1, n + 1)}
    for (i, j) in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {1}
    stack = [1]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == n


def ring(n: int) -> Graph:
    """Cycle graph on n >= 3 agents."""
    if n < 3:
        raise GraphError("ring needs n >= 3")
    edges = [(i, i + 1) for i in range(1, n)] + [(1, n)]
    return Graph(n, tuple(sorted(edges)))


def path(n: int) -> Graph:
    """Path graph on n >= 2 agents."""
    if n < 2:
        raise GraphError("path needs n >= 2")
    return Graph(n, tuple((i, i + 1) for i in range(1, n)))


def complete(n: int) -> Graph:
    """Complete graph on n >= 2 agents."""
    if n < 2:
        raise GraphError("complete needs n >= 2")
    return Graph(n, tuple((i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)))


def incidence(g: Graph) -> np.ndarray:
    """Oriented {+1,-1,0} incidence matrix, N rows x |E| columns.

    Column for edge (i, j): +1 at the lower-indexed endpoint i, -1 at j.
    """
    D = np.zeros((g.n_agents, g.n_edges))
    for ell, (i, j) in enumerate(g.edges):
        D[i - 1, ell] = 1.0
        D[j - 1, ell] = -1.0
    return D


def laplacian(g: Graph) -> np.ndarray:
    """Graph Laplacian L = D @ D.T (symmetric PSD, zero row sums)."""
    D = incidence(g)
    return D @ D.T


def algebraic_connectivity(g: Graph) -> float:
    """Smallest nonzero eigenvalue of the Laplacian."""
    evals = np.linalg.eigvalsh(laplacian(g))
    lam_max = float(evals[-1])
    nonzero = evals[evals > _EIG_REL_TOL * max(lam_max, 1.0)]
    if len(nonzero) == 0 or len(nonzero) > g.n_agents - 1:
        raise GraphError("algebraic connectivity not defined (disconnected?)")
    return float(nonzero[0])


def consensus_projector(n: int) -> np.ndarray:
    """P = I - (1/n) * ones * ones.T, the orthogonal projector onto the
    zero-mean (disagreement) subspace."""
    if n < 1:
        raise GraphError("n must be >= 1")
    return np.eye(n) - np.ones((n, n)) / n


def project_to_zero_mean(v: np.ndarray) -> np.ndarray:
    """Subtract the mean; identity on already zero-mean vectors."""
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


def parse_graph_spec(spec: str) -> Graph:
    """Parse 'ring:5' / 'path:3' / 'complete:4' or a JSON file path."""
    if ":" in spec:
        kind, _, num = spec.partition(":")
        gens = {"ring": ring, "path": path, "complete": complete}
        if kind in gens:
            return gens[kind](int(num))
    return Graph.from_json(spec)

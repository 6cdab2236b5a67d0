"""Communication topologies and doubly stochastic mixing matrices."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from . import spectral

CONNECT_RETRY_LIMIT = 1000


@dataclass(frozen=True)
class Graph:
    """Undirected graph on nodes 0..n-1 with per-node sorted neighbor lists."""

    n: int
    edges: frozenset
    neighbor_lists: tuple

    @staticmethod
    def from_edges(n, edges):
        if n < 2:
            raise ValueError(f"need at least 2 nodes, got n={n}")
        canon = set()
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for n={n}")
            canon.add((min(i, j), max(i, j)))
        nbrs = [[] for _ in range(n)]
        for i, j in canon:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return Graph(n, frozenset(canon), tuple(tuple(sorted(v)) for v in nbrs))

    def degree(self, i):
        return len(self.neighbor_lists[i])

    def degrees(self):
        return np.array([len(v) for v in self.neighbor_lists], dtype=int)

    def is_connected(self):
        seen = {0}
        queue = deque([0])
        while queue:
            u = queue.popleft()
            for v in self.neighbor_lists[u]:
                if v not in seen:
                    seen.add(v)
                    queue.append(v)
        return len(seen) == self.n

    def to_edge_list(self):
        lines = [str(self.n)]
        lines += [f"{i} {j}" for i, j in sorted(self.edges)]
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_edge_list(text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty edge-list")
        n = int(lines[0])
        edges = []
        for ln in lines[1:]:
            i, j = ln.split()
            edges.append((int(i), int(j)))
        return Graph.from_edges(n, edges)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_edge_list())

    @staticmethod
    def load(path):
        with open(path) as fh:
            return Graph.from_edge_list(fh.read())


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic weights with cached spectral quantities."""

    A: np.ndarray
    sigma_A: float
    norm_A_minus_I: float


def erdos_renyi(n, p, seed, retry_limit=CONNECT_RETRY_LIMIT):
    """Connected Erdos-Renyi graph; resamples the whole graph until connected."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got n={n}")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"link probability must be in (0,1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(retry_limit):
        mask = rng.random(len(iu)) < p
        g = Graph.from_edges(n, list(zip(iu[mask].tolist(), ju[mask].tolist())))
        if g.is_connected():
            return g
    raise RuntimeError(
        f"no connected graph after {retry_limit} attempts (n={n}, p={p}); "
        "increase p or the retry limit"
    )


def metropolis_weights(g: Graph) -> MixingMatrix:
    """Metropolis rule: a_ij = 1/(1+max(deg_i, deg_j)), self-weight the complement."""
    if not g.is_connected():
        raise ValueError("graph must be connected")
    deg = g.degrees()
    A = np.zeros((g.n, g.n))
    for i, j in g.edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        A[i, j] = w
        A[j, i] = w
    np.fill_diagonal(A, 1.0 - A.sum(axis=1))
    return MixingMatrix(A, spectral_radius_deviation(A), spectral_norm_A_minus_I(A))


def spectral_radius_deviation(A):
    """Spectral radius of A - 11^T/n for symmetric doubly stochastic A."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    return spectral.spectral_radius_sym(A - np.full((n, n), 1.0 / n))


def spectral_norm_A_minus_I(A):
    """Spectral norm of A - I for symmetric A."""
    A = np.asarray(A, dtype=float)
    return spectral.spectral_radius_sym(A - np.eye(A.shape[0]))

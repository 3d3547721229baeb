"""
Time-varying communication topology.

Agents are indexed ``0..n-1``.  A round graph is stored as a boolean
adjacency matrix ``A`` with ``A[i, j]`` true when agent ``i`` receives from
agent ``j``, i.e. the directed edge ``(j, i)`` is present.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import connected_components

from dpdcc._rng import stream

__all__ = [
    "GraphRound",
    "MixingMatrix",
    "ConsensusConstants",
    "RandomRingTopology",
    "segment_edges",
    "generate_round_graph",
    "mixing_matrix",
    "check_b_connectivity",
    "consensus_decay_check",
    "consensus_constants",
    "write_edge_trace",
    "read_edge_trace",
]

PHASES = 4


@dataclass(frozen=True)
class GraphRound:
    t: int
    adjacency: np.ndarray

    @property
    def n(self):
        return self.adjacency.shape[0]

    @cached_property
    def edges(self):
        """Directed edges ``(j, i)`` in row-major order of the receiver."""
        recv, send = np.nonzero(self.adjacency)
        return list(zip(send.tolist(), recv.tolist()))

    @property
    def edge_count(self):
        return int(np.count_nonzero(self.adjacency))

    def in_neighbors(self, i):
        return np.flatnonzero(self.adjacency[i])

    def out_neighbors(self, i):
        return np.flatnonzero(self.adjacency[:, i])

    def out_degrees(self):
        return self.adjacency.sum(axis=0)


@dataclass(frozen=True)
class MixingMatrix:
    W: np.ndarray
    floor: float

    def check(self, atol=1e-12, support=None):
        """Raise ``ValueError`` unless ``W`` is doubly stochastic with the floor."""
        W = self.W
        if np.any(W < 0):
            raise ValueError("mixing matrix has negative entries")
        if np.abs(W.sum(axis=1) - 1.0).max() > atol:
            raise ValueError("mixing matrix rows do not sum to one")
        if np.abs(W.sum(axis=0) - 1.0).max() > atol:
            raise ValueError("mixing matrix columns do not sum to one")
        positive = W[W > 0]
        if positive.size and positive.min() < self.floor - atol:
            raise ValueError(f"positive entry below floor {self.floor}")
        if support is not None:
            allowed = support | np.eye(W.shape[0], dtype=bool)
            if np.any(W[~allowed] != 0) or np.any(W[allowed] < self.floor - atol):
                raise ValueError("mixing matrix support does not match the graph")
        return self


@dataclass(frozen=True)
class ConsensusConstants:
    """Geometric consensus envelope ``|[W_t ... W_s]_ij - 1/n| <= tau lam^(t-s)``."""

    tau: float
    lam: float
    B: int

    def bound(self, steps):
        return self.tau * self.lam**steps


def consensus_constants(w, n, B):
    if not 0 < w < 1:
        raise ValueError("weight floor must lie in (0, 1)")
    if B < 1:
        raise ValueError("B must be a positive integer")
    base = 1.0 - w / (4.0 * n * n)
    return ConsensusConstants(tau=base**-2, lam=base ** (1.0 / B), B=int(B))


def segment_edges(n, t):
    """
    Deterministic chain edges added at round ``t``.

    The chain ``0-1-...-(n-1)`` is cut into four consecutive runs; run ``k``
    (``k = 0..3``) covers links ``i -> i + 1`` for
    ``floor(k (n-1) / 4) <= i < floor((k+1) (n-1) / 4)`` and is active in rounds
    with ``(t - 1) mod 4 == k``.  For ``n = 100`` this gives the runs
    ``1..24, 25..49, 50..74, 75..99`` in one-based link numbering.
    """
    k = (t - 1) % PHASES
    lo = (k * (n - 1)) // PHASES
    hi = ((k + 1) * (n - 1)) // PHASES
    return [(i, i + 1) for i in range(lo, hi)]


def generate_round_graph(n, rho, t, rng):
    """
    Undirected random graph plus the round's chain segment.

    Each unordered pair is linked independently with probability ``rho``;
    ``n * n`` uniforms are consumed from ``rng`` whatever ``rho`` is.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {rho}")
    if n < 2:
        raise ValueError("need at least two agents")
    upper = np.triu(rng.random((n, n)) < rho, k=1)
    for i, j in segment_edges(n, t):
        upper[i, j] = True
    return GraphRound(t=t, adjacency=upper | upper.T)


def mixing_matrix(graph):
    """Uniform ``1/n`` weights on edges, remaining mass on the diagonal."""
    n = graph.n
    A = graph.adjacency.astype(float)
    np.fill_diagonal(A, 0.0)
    W = A / n
    diag = 1.0 - W.sum(axis=1)
    if np.any(diag <= 0):
        raise ValueError("a vertex has n or more neighbors; diagonal would be non-positive")
    W[np.diag_indices(n)] = diag
    return MixingMatrix(W=W, floor=1.0 / n).check(support=graph.adjacency)


def check_b_connectivity(window):
    """True iff the union of the window's edge sets is strongly connected."""
    window = list(window)
    if not window:
        raise ValueError("window must be nonempty")
    union = np.zeros_like(window[0].adjacency)
    for g in window:
        union |= g.adjacency
    ncomp, _ = connected_components(union, directed=True, connection="strong")
    return ncomp == 1


def consensus_decay_check(mixings, atol=1e-12):
    """
    ``max_ij |[W_t ... W_s]_ij - 1/n|`` for the matrices of rounds ``s..t``.

    ``mixings`` lists ``W_s, ..., W_t`` in round order (arrays or
    :class:`MixingMatrix`); each must be doubly stochastic.
    """
    mats = [mw.W if isinstance(mw, MixingMatrix) else np.asarray(mw, float) for mw in mixings]
    if not mats:
        raise ValueError("need at least one mixing matrix")
    n = mats[0].shape[0]
    prod = np.eye(n)
    for W in mats:
        if not (
            np.all(W >= 0)
            and np.allclose(W.sum(axis=0), 1, rtol=0, atol=atol)
            and np.allclose(W.sum(axis=1), 1, rtol=0, atol=atol)
        ):
            raise ValueError("precondition violated: matrix is not doubly stochastic")
        prod = W @ prod
    return float(np.max(np.abs(prod - 1.0 / n)))


class RandomRingTopology:
    """
    Seeded round-graph source: random pairs plus rotating chain segments.

    Round ``t`` is generated from its own sub-stream, so two runs with the
    same seed see identical graphs regardless of the algorithm they drive.
    """

    def __init__(self, n, rho, seed, B=PHASES):
        if not 0.0 <= rho <= 1.0:
            raise ValueError(f"edge probability must lie in [0, 1], got {rho}")
        self.n = n
        self.rho = rho
        self.seed = seed
        self.B = B
        self._last = None

    def _round(self, t):
        if self._last is None or self._last[0] != t:
            g = generate_round_graph(self.n, self.rho, t, stream(self.seed, "graph", t))
            self._last = (t, g, mixing_matrix(g))
        return self._last

    def graph(self, t):
        return self._round(t)[1]

    def mixing(self, t):
        return self._round(t)[2]

    @property
    def constants(self):
        return consensus_constants(1.0 / self.n, self.n, self.B)


def write_edge_trace(graphs, path):
    """One ``round sender receiver`` line per directed edge (0-based agents)."""
    with open(path, "w") as fh:
        fh.write("# round j i\n")
        for g in graphs:
            for j, i in g.edges:
                fh.write(f"{g.t} {j} {i}\n")


def read_edge_trace(path, n):
    """Rebuild the graphs of an edge trace; rounds without edges are omitted."""
    rows = np.loadtxt(path, dtype=np.int64, comments="#", ndmin=2)
    graphs = []
    for t in np.unique(rows[:, 0]) if rows.size else []:
        A = np.zeros((n, n), bool)
        sel = rows[rows[:, 0] == t]
        A[sel[:, 2], sel[:, 1]] = True
        graphs.append(GraphRound(t=int(t), adjacency=A))
    return graphs

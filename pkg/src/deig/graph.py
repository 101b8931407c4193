"""Undirected graph model, generators and edge-visitation schedules.

Nodes are numbered ``0..N-1``.  A :class:`Graph` is an immutable snapshot;
editing it returns a new snapshot with the ``generation`` counter advanced.
"""

from dataclasses import dataclass, field
from enum import Enum

import networkx as nx
import numpy as np

from deig.errors import (
    ConnectivityRetryExhausted,
    Disconnected,
    InfeasibleParameters,
    IsolatedNode,
    ParseError,
)


def _norm_edge(i, j):
    i, j = int(i), int(j)
    if i == j:
        raise ValueError(f"self-loop at node {i}")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    n_nodes: int
    edges: frozenset = field(default_factory=frozenset)
    generation: int = 0

    def __post_init__(self):
        norm = frozenset(_norm_edge(i, j) for i, j in self.edges)
        for i, j in norm:
            if not (0 <= i < self.n_nodes and 0 <= j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) outside 0..{self.n_nodes - 1}")
        object.__setattr__(self, "edges", norm)

    @classmethod
    def from_edges(cls, n_nodes, edges):
        return cls(n_nodes, frozenset(edges))

    # ----- views -------------------------------------------------------
    @property
    def n_edges(self):
        return len(self.edges)

    def edge_list(self):
        """Edges as a sorted list of ``(i, j)`` with ``i < j``."""
        return sorted(self.edges)

    def has_edge(self, i, j):
        return _norm_edge(i, j) in self.edges

    def neighbors(self, i):
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def neighbor_sets(self):
        nbrs = [[] for _ in range(self.n_nodes)]
        for i, j in self.edge_list():
            nbrs[i].append(j)
            nbrs[j].append(i)
        return [sorted(s) for s in nbrs]

    def adjacency(self):
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def degrees(self):
        return self.adjacency().sum(axis=1)

    def laplacian(self):
        a = self.adjacency()
        return np.diag(a.sum(axis=1)) - a

    def incidence(self):
        """Oriented incidence matrix, one column per edge in ``edge_list`` order."""
        edges = self.edge_list()
        b = np.zeros((self.n_nodes, len(edges)))
        for col, (i, j) in enumerate(edges):
            b[i, col] = 1.0
            b[j, col] = -1.0
        return b

    def _inv_sqrt_degrees(self):
        deg = self.degrees()
        if np.any(deg == 0):
            raise IsolatedNode(f"node {int(np.flatnonzero(deg == 0)[0])} has no neighbors")
        return 1.0 / np.sqrt(deg)

    def normalized_adjacency(self):
        """``D^{-1/2} A D^{-1/2}``; its largest eigenvalue is 1."""
        s = self._inv_sqrt_degrees()
        return s[:, None] * self.adjacency() * s[None, :]

    def sym_normalized_laplacian(self):
        """``I - D^{-1/2} A D^{-1/2}``."""
        return np.eye(self.n_nodes) - self.normalized_adjacency()

    def is_connected(self):
        if self.n_nodes == 0:
            return True
        seen = {0}
        stack = [0]
        nbrs = self.neighbor_sets()
        while stack:
            for j in nbrs[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n_nodes

    # ----- edits -------------------------------------------------------
    def add_edge(self, i, j):
        e = _norm_edge(i, j)
        if e in self.edges:
            raise ValueError(f"edge {e} already present")
        return Graph(self.n_nodes, self.edges | {e}, self.generation + 1)

    def remove_edge(self, i, j):
        e = _norm_edge(i, j)
        if e not in self.edges:
            raise ValueError(f"edge {e} not present")
        return Graph(self.n_nodes, self.edges - {e}, self.generation + 1)

    def apply(self, event):
        if event.kind is EdgeKind.ADD:
            return self.add_edge(*event.edge)
        return self.remove_edge(*event.edge)

    # ----- text I/O ----------------------------------------------------
    def to_text(self):
        lines = [f"nodes {self.n_nodes}"] + [f"{i} {j}" for i, j in self.edge_list()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        n = None
        edges = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if n is None:
                if len(parts) != 2 or parts[0] != "nodes":
                    raise ParseError("expected header 'nodes N'", line=lineno)
                try:
                    n = int(parts[1])
                except ValueError:
                    raise ParseError("node count must be an integer", line=lineno) from None
                continue
            if len(parts) != 2:
                raise ParseError("expected 'i j'", line=lineno)
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ParseError("node ids must be integers", line=lineno) from None
        if n is None:
            raise ParseError("missing 'nodes N' header", line=1)
        try:
            return cls.from_edges(n, edges)
        except ValueError as exc:
            raise ParseError(str(exc), line=None) from None

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.n_nodes))
        g.add_edges_from(self.edges)
        return g


class EdgeKind(Enum):
    ADD = "add"
    REMOVE = "remove"


@dataclass(frozen=True)
class EdgeEvent:
    """Insertion (``rho = +1``) or deletion (``rho = -1``) of one edge."""

    kind: EdgeKind
    edge: tuple

    def __post_init__(self):
        object.__setattr__(self, "edge", _norm_edge(*self.edge))

    @property
    def rho(self):
        return 1.0 if self.kind is EdgeKind.ADD else -1.0

    def b(self, n_nodes):
        """Signed incidence column: ``+1`` at the first endpoint, ``-1`` at the second."""
        vec = np.zeros(n_nodes)
        vec[self.edge[0]] = 1.0
        vec[self.edge[1]] = -1.0
        return vec


def node_sequence_protocol(g, start=0):
    """Head/Tail edge visitation order starting from node ``start``.

    The active head pairs with each neighbor that has never been head (edges to
    former heads were covered when those nodes were active).  Control then
    passes to the lowest-index such neighbor; with none left, it returns to the
    previous head, and the walk ends back at ``start``.
    """
    if not g.is_connected():
        raise Disconnected("head/tail protocol needs a connected graph")
    if not 0 <= start < g.n_nodes:
        raise IndexError(f"start node {start} outside graph")
    nbrs = g.neighbor_sets()
    been_head = {start}
    order = [(start, j) for j in nbrs[start]]
    stack = [start]
    while stack:
        head = stack[-1]
        fresh = [j for j in nbrs[head] if j not in been_head]
        if not fresh:
            stack.pop()
            continue
        nxt = fresh[0]
        been_head.add(nxt)
        stack.append(nxt)
        order.extend((nxt, j) for j in nbrs[nxt] if j not in been_head)
    return order


MAX_RETRIES = 100


def _retry_connected(build, seed, what):
    for attempt in range(MAX_RETRIES):
        nxg = build(seed + attempt)
        if nx.is_connected(nxg):
            return Graph.from_edges(nxg.number_of_nodes(), nxg.edges())
    raise ConnectivityRetryExhausted(f"{what}: no connected sample in {MAX_RETRIES} seeds from {seed}")


def gen_d_regular(n, d, seed):
    """Random connected ``d``-regular graph (seed advanced until connected)."""
    if n * d % 2 or d >= n or d < 1:
        raise InfeasibleParameters(f"no simple {d}-regular graph on {n} nodes")
    if d == 1 and n > 2:
        raise InfeasibleParameters("a 1-regular graph on more than 2 nodes is disconnected")
    return _retry_connected(lambda s: nx.random_regular_graph(d, n, seed=s), seed, "d-regular")


def gen_small_world(n, k, p, seed):
    """Ring lattice with ``k`` neighbors per node, each edge rewired w.p. ``p``."""
    if k % 2 or k < 2 or k >= n:
        raise InfeasibleParameters(f"ring lattice needs even 2 <= k < n, got k={k}, n={n}")
    if not 0.0 <= p <= 1.0:
        raise InfeasibleParameters("rewiring probability must lie in [0, 1]")
    return _retry_connected(lambda s: nx.watts_strogatz_graph(n, k, p, seed=s), seed, "small-world")


def rank_two_laplacian_vectors(lap, t):
    """Bordering vectors ``(x_tilde, x_bar)`` for column ``t`` of ``lap``.

    ``sum_t x_tilde x_tilde^T - x_bar x_bar^T`` over all columns rebuilds the
    Laplacian; step ``t`` only touches row/column ``t`` and the trailing block.
    """
    lap = np.asarray(lap, dtype=float)
    n = lap.shape[0]
    ltt = lap[t, t]
    if ltt <= 0:
        raise IsolatedNode(f"node {t} has no neighbors")
    root = np.sqrt(ltt)
    x_tilde = np.zeros(n)
    x_bar = np.zeros(n)
    x_tilde[t] = root
    x_tilde[t + 1 :] = lap[t + 1 :, t] / root
    x_bar[t + 1 :] = lap[t + 1 :, t] / root
    return x_tilde, x_bar


def node_join_events(g, node, new_neighbors):
    """Edge insertions performed one by one when ``node`` joins."""
    return [EdgeEvent(EdgeKind.ADD, (node, j)) for j in sorted(new_neighbors) if not g.has_edge(node, j)]


def node_leave_events(g, node):
    """Edge deletions announced by ``node`` before it leaves."""
    return [EdgeEvent(EdgeKind.REMOVE, (node, j)) for j in g.neighbors(node)]


def one_hop_tables(g):
    """Per node: the neighbor sets of each of its neighbors."""
    nbrs = g.neighbor_sets()
    return [{j: tuple(nbrs[j]) for j in nbrs[i]} for i in range(g.n_nodes)]


def node_failure_events(tables, failed):
    """Deletions emitted by the survivors after ``failed`` drops silently.

    Each surviving neighbor finds ``failed`` in its one-hop table and removes
    the shared edge; the lowest-index neighbor acts first.
    """
    removers = sorted(i for i, table in enumerate(tables) if failed in table and i != failed)
    return [EdgeEvent(EdgeKind.REMOVE, (i, failed)) for i in removers]


def random_edge_events(g, count, rng, keep_connected=True):
    """Random schedule of edge insertions and deletions on ``g``.

    Removals are drawn only among edges whose loss keeps the graph connected
    when ``keep_connected`` is set.  Returns ``(events, graphs)`` where
    ``graphs[i]`` is the topology after event ``i``.
    """
    events, graphs = [], []
    current = g
    n = g.n_nodes
    for step in range(count):
        remove = rng.random() < 0.5
        if remove:
            cands = current.edge_list()
            rng.shuffle(cands)
            chosen = None
            for e in cands:
                trial = current.remove_edge(*e)
                if not keep_connected or trial.is_connected():
                    chosen = e
                    break
            if chosen is None:
                remove = False
        if not remove:
            absent = [(i, j) for i in range(n) for j in range(i + 1, n) if not current.has_edge(i, j)]
            if not absent:
                raise InfeasibleParameters("complete graph: no edge to add or remove")
            chosen = absent[int(rng.integers(len(absent)))]
        ev = EdgeEvent(EdgeKind.REMOVE if remove else EdgeKind.ADD, chosen)
        current = current.apply(ev)
        events.append(ev)
        graphs.append(current)
    return events, graphs


BENCHMARK10_EDGES = [(0, 1), (0, 4), (0, 5), (1, 2), (1, 6), (2, 3), (2, 7), (3, 4), (3, 8), (4, 9)]
SUBARRAY6_NEIGHBORS = {0: (1, 2), 1: (0, 2), 2: (0, 1, 3), 3: (2, 4, 5), 4: (3, 5), 5: (3, 4)}


def benchmark10_graph():
    """The 10-node benchmark graph with five distinct nonzero Laplacian eigenvalues."""
    return Graph.from_edges(10, BENCHMARK10_EDGES)


def subarray6_graph():
    """The 6-subarray communication graph of the DoA benchmark."""
    edges = {(i, j) for i, nb in SUBARRAY6_NEIGHBORS.items() for j in nb}
    return Graph.from_edges(6, edges)

"""Online decentralized eigendecomposition of a rank-one-updated matrix.

The tracked matrix is ``R(t) = R(t-1) + rho x(t) x(t)^H`` with
``R(t-1) = U Lambda U^H``.  Node ``i`` owns entries ``x_j`` of the observation
and the matching rows of ``U``.  One step:

1. every entry ``z_k = sum_j conj(U_jk) x_j`` of ``z = U^H x`` is summed over
   the network (one consensus instance per ``k``), so each node ends up with
   its own copy ``z_i``;
2. each node eigen-decomposes ``Lambda_i + rho z_i z_i^H = V diag(lam) V^H``
   locally, after deflation;
3. each node sets ``Lambda_i <- lam`` and multiplies its rows of ``U`` by ``V``.

Nodes never re-synchronize their spectra; with an inexact consensus backend
the copies drift apart, and :func:`node_disagreement` measures that.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from deig.consensus import ConsensusConfig, Protocol, nc_weighted_sum
from deig.errors import NonConvergence
from deig.linalg.deflation import rank_one_eigenupdate
from deig.linalg.secular import DEFAULT_XI, RankOneUpdate
from deig.netsim import NodeState, RoundMetrics

TRAJECTORY_COLUMNS = ("t", "k", "lambda_k", "node_disagreement", "consensus_rounds")
# Entries of z_i and gaps in the spectrum below this relative size are treated
# as exact zeros and ties.  It has to sit above the rounding noise an inexact
# consensus backend leaves in z_i; otherwise nodes resolve the same tie in
# different ways and their rows of U stop fitting together.
TRACKER_DEFLATION_EPS = 1e-8


@dataclass
class TrackerNetwork:
    graph: object
    consensus: ConsensusConfig
    owners: np.ndarray  # owners[j] = node holding vector entry j
    nodes: list
    t: int = 0
    xi: float = DEFAULT_XI
    metrics: RoundMetrics = field(default_factory=RoundMetrics)
    deflation_eps: float = TRACKER_DEFLATION_EPS

    @property
    def dim(self):
        return self.owners.size

    def entries_of(self, node):
        return np.flatnonzero(self.owners == node)


def make_tracker(graph, consensus=None, owners=None, complex_field=False, xi=DEFAULT_XI,
                 deflation_eps=TRACKER_DEFLATION_EPS):
    """Tracker at ``t = 0``: every spectrum copy zero, ``U = I``.

    ``owners`` maps each vector entry to a node; by default node ``i`` owns
    entry ``i``.
    """
    consensus = consensus or ConsensusConfig()
    n_nodes = graph.n_nodes
    owners = np.arange(n_nodes) if owners is None else np.asarray(owners, dtype=int)
    if owners.min() < 0 or owners.max() >= n_nodes:
        raise ValueError("owner ids must be valid node ids")
    dim = owners.size
    dtype = complex if complex_field else float
    nodes = []
    for i in range(n_nodes):
        mine = np.flatnonzero(owners == i)
        st = NodeState.initial(0, dim, dtype)
        st.id = i
        rows = np.zeros((mine.size, dim), dtype=dtype)
        rows[np.arange(mine.size), mine] = 1.0
        st.u_row_prev = rows.copy()
        st.u_row_curr = rows
        nodes.append(st)
    return TrackerNetwork(graph, consensus, owners, nodes, xi=xi, deflation_eps=deflation_eps)


def _summands(net, x):
    """Per-node partial sums ``sum_{j owned} conj(U_jk) x_j`` for all ``k``."""
    n_nodes = net.graph.n_nodes
    dtype = np.result_type(x.dtype, net.nodes[0].u_row_curr.dtype)
    out = np.zeros((n_nodes, net.dim), dtype=dtype)
    for i, st in enumerate(net.nodes):
        mine = net.entries_of(i)
        if mine.size:
            out[i] = x[mine] @ np.conj(st.u_row_curr)
    if not np.iscomplexobj(out):
        out = out.real
    return out


def tracker_step(net, x, rho=1.0, alpha=None):
    """One online update with observation ``x`` (one entry per vector index).

    With ``alpha`` set, each node first scales its spectrum by ``alpha`` and
    the observation enters with weight ``1 - alpha`` (exponentially weighted
    covariance); ``rho`` must then be positive.
    """
    x = np.asarray(x)
    if x.shape != (net.dim,):
        raise ValueError(f"observation must have {net.dim} entries")
    if rho == 0:
        raise ValueError("rho must be nonzero")
    if np.iscomplexobj(x) and not np.iscomplexobj(net.nodes[0].u_row_curr):
        for st in net.nodes:
            st.u_row_curr = st.u_row_curr.astype(complex)
            st.u_row_prev = st.u_row_prev.astype(complex)
    t = net.t + 1
    if alpha is not None:
        if not 0 <= alpha < 1:
            raise ValueError("alpha must lie in [0, 1)")
        x = x * np.sqrt(1.0 - alpha)

    summands = _summands(net, x)
    z_all = nc_weighted_sum(net.graph, summands, net.consensus, net.metrics).estimates

    cache = {}
    for i, st in enumerate(net.nodes):
        lam_prev = st.lambda_curr * alpha if alpha is not None else st.lambda_curr
        z_i = np.asarray(z_all[i])
        key = (lam_prev.tobytes(), z_i.tobytes())
        if key not in cache:
            try:
                cache[key] = rank_one_eigenupdate(lam_prev, RankOneUpdate(rho, z_i), xi=net.xi,
                                                  eps=net.deflation_eps)
            except NonConvergence as exc:
                raise exc.tagged(node=i, t=t) from exc
        lam_new, v = cache[key]
        st.lambda_prev = st.lambda_curr
        st.lambda_curr = lam_new
        st.u_row_prev = st.u_row_curr
        st.u_row_curr = st.u_row_curr @ v
        st.z_local = z_i
        st.v_scratch = v[:, -1]
    net.t = t
    return net


def tracker_rank_two_step(net, x_plus, x_minus):
    """Add ``x_plus x_plus^H`` then remove ``x_minus x_minus^H``."""
    tracker_step(net, x_plus, rho=1.0)
    tracker_step(net, x_minus, rho=-1.0)
    return net


def gather_global(net, node=0):
    """Spectrum copy of ``node`` and the row-assembled eigenvector matrix."""
    dtype = net.nodes[0].u_row_curr.dtype
    u = np.zeros((net.dim, net.dim), dtype=dtype)
    for i, st in enumerate(net.nodes):
        u[net.entries_of(i)] = st.u_row_curr
    return net.nodes[node].lambda_curr.copy(), u


def node_disagreement(net):
    """Largest entrywise spread of the spectrum copies across nodes."""
    lam = np.array([st.lambda_curr for st in net.nodes])
    return float((lam.max(axis=0) - lam.min(axis=0)).max(initial=0.0))


def node_spectra(net):
    return np.array([st.lambda_curr for st in net.nodes])


def trajectory_rows(net):
    lam = net.nodes[0].lambda_curr
    spread = node_disagreement(net)
    return [
        {"t": net.t, "k": k, "lambda_k": float(v), "node_disagreement": spread,
         "consensus_rounds": net.metrics.consensus_rounds}
        for k, v in enumerate(lam)
    ]


def write_trajectory_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=TRAJECTORY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def exact_config():
    return ConsensusConfig(protocol=Protocol.EXACT)

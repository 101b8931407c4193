"""Learning and tracking the Laplacian spectrum of a dynamic graph.

The tracked matrix starts at zero and is built from rank-one updates:

* ``incidence``: one step ``+ b b^T`` per edge, with ``b`` the signed incidence
  column, visited in the head/tail protocol order (``N_e`` steps);
* ``rank-two``: column bordering ``+ x_tilde x_tilde^T - x_bar x_bar^T`` for
  each node (``N`` rank-two steps).

With ``normalized`` set, incidence columns are scaled entrywise by
``1/sqrt(d_i)`` so the learned matrix is ``I - D^{-1/2} A D^{-1/2}``.  After
learning, every edge event is one ``+-b b^T`` step.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from deig.errors import Disconnected
from deig.graph import (
    EdgeKind,
    node_sequence_protocol,
    random_edge_events,
    rank_two_laplacian_vectors,
)
from deig.netsim import rng_stream
from deig.tracker import make_tracker, tracker_rank_two_step, tracker_step

SPECTRUM_COLUMNS = ("t", "k", "lambda_est", "lambda_true", "eta")
LEARNING_MODES = ("incidence", "rank-two")


@dataclass(frozen=True)
class SpectrumScenario:
    graph: object
    learning: str = "incidence"
    normalized: bool = False
    events: tuple = ()  # EdgeEvents applied one per step after learning
    seed: int = 0

    def __post_init__(self):
        if self.learning not in LEARNING_MODES:
            raise ValueError(f"unknown learning mode {self.learning!r}")
        if self.normalized and self.learning != "incidence":
            raise ValueError("the normalized Laplacian is learned from incidence columns only")
        if self.normalized and self.events:
            raise ValueError("edge events change degrees; only the plain Laplacian is tracked")


@dataclass
class SpectrumResult:
    """Per-step tracked and reference spectra (descending), shape ``(T, N)``.

    ``eta[t]`` is the relative error of the largest eigenvalue against the
    spectrum of the topology in force at step ``t``.
    """

    lam_est: np.ndarray
    lam_true: np.ndarray
    eta: np.ndarray
    learning_steps: int
    graphs: list = field(default_factory=list)

    def rows(self):
        out = []
        for t in range(self.lam_est.shape[0]):
            for k in range(self.lam_est.shape[1]):
                ref = self.lam_true[t, k]
                err = abs(self.lam_est[t, k] - ref) / abs(ref) if ref != 0 else abs(self.lam_est[t, k])
                out.append({"t": t + 1, "k": k, "lambda_est": float(self.lam_est[t, k]),
                            "lambda_true": float(ref), "eta": float(err)})
        return out


def target_matrix(graph, normalized=False):
    return graph.sym_normalized_laplacian() if normalized else graph.laplacian()


def reference_spectrum(graph, normalized=False):
    return np.sort(np.linalg.eigvalsh(target_matrix(graph, normalized)))[::-1]


def incidence_vectors(graph, normalized=False, start=0):
    """Learning vectors in head/tail order: ``+1`` at the head, ``-1`` at the tail."""
    n = graph.n_nodes
    scale = 1.0 / np.sqrt(graph.degrees()) if normalized else np.ones(n)
    out = []
    for head, tail in node_sequence_protocol(graph, start):
        x = np.zeros(n)
        x[head] = scale[head]
        x[tail] = -scale[tail]
        out.append(x)
    return out


def rank_two_vectors(graph):
    """Bordering pairs ``(x_tilde, x_bar)`` for every node with a neighbor."""
    lap = graph.laplacian()
    return [rank_two_laplacian_vectors(lap, t) for t in range(graph.n_nodes) if lap[t, t] > 0]


def _lambda1_error(est, ref):
    return abs(est[0] - ref[0]) / abs(ref[0]) if ref[0] != 0 else abs(est[0])


def run_spectrum(scenario, net=None, consensus=None):
    """Learn the spectrum of ``scenario.graph``, then follow its edge events.

    One record is produced per tracker step (a rank-two step counts once).
    Node ``i`` owns entry ``i``; the tracker's own copy at node 0 is reported.
    """
    g = scenario.graph
    if not g.is_connected():
        raise Disconnected("spectrum learning needs a connected graph")
    net = net or make_tracker(g, consensus)
    ref = reference_spectrum(g, scenario.normalized)
    est_rows, ref_rows, graphs = [], [], []

    def record(graph, reference):
        est_rows.append(net.nodes[0].lambda_curr.copy())
        ref_rows.append(reference)
        graphs.append(graph)

    if scenario.learning == "incidence":
        for x in incidence_vectors(g, scenario.normalized):
            tracker_step(net, x, rho=1.0)
            record(g, ref)
    else:
        for x_tilde, x_bar in rank_two_vectors(g):
            tracker_rank_two_step(net, x_tilde, x_bar)
            record(g, ref)
    learning_steps = len(est_rows)

    current = g
    for ev in scenario.events:
        nxt = current.apply(ev)
        if ev.kind is EdgeKind.REMOVE and current.is_connected() and not nxt.is_connected():
            raise Disconnected(f"removing edge {ev.edge} disconnects the graph")
        current = nxt
        net.graph = current
        tracker_step(net, ev.b(g.n_nodes), rho=ev.rho)
        record(current, reference_spectrum(current))

    lam_est = np.array(est_rows)
    lam_true = np.array(ref_rows)
    eta = np.array([_lambda1_error(e, r) for e, r in zip(lam_est, lam_true)])
    return SpectrumResult(lam_est, lam_true, eta, learning_steps, graphs)


def random_event_scenario(graph, n_events, seed, learning="incidence"):
    """Scenario with ``n_events`` random insertions/removals that keep ``graph`` connected."""
    rng = rng_stream(seed, "edge-events")
    events, _ = random_edge_events(graph, n_events, rng, keep_connected=True)
    return SpectrumScenario(graph, learning=learning, events=tuple(events), seed=seed)


def write_spectrum_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SPECTRUM_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

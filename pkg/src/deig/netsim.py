"""Synchronous message-passing substrate with cost accounting.

A :class:`Network` holds one private state object per node.  A round has a
send phase, where every node addresses payloads to its neighbors, and a
receive phase, where every node folds its inbox into its own state.  Closures
only ever see their own node's state, and sending to a non-neighbor raises
:class:`~deig.errors.LocalityViolation`.
"""

import csv
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from deig.errors import LocalityViolation

METRICS_COLUMNS = ("t", "consensus_rounds", "scalar_messages", "wall_rounds")


@dataclass
class NodeState:
    """Per-node storage of the online tracker: six length-``N`` arrays."""

    id: int
    u_row_prev: np.ndarray
    u_row_curr: np.ndarray
    lambda_prev: np.ndarray
    lambda_curr: np.ndarray
    z_local: np.ndarray
    v_scratch: np.ndarray

    @classmethod
    def initial(cls, node, n, dtype=float):
        """Start state: zero spectrum, own row of the identity."""
        e = np.zeros(n, dtype=dtype)
        e[node] = 1.0
        return cls(
            id=node,
            u_row_prev=e.copy(),
            u_row_curr=e,
            lambda_prev=np.zeros(n),
            lambda_curr=np.zeros(n),
            z_local=np.zeros(n, dtype=dtype),
            v_scratch=np.zeros(n, dtype=dtype),
        )

    def arrays(self):
        return (self.u_row_prev, self.u_row_curr, self.lambda_prev, self.lambda_curr, self.z_local, self.v_scratch)

    def storage_floats(self):
        """Number of stored scalars (complex entries count once)."""
        return sum(a.size for a in self.arrays())


@dataclass
class RoundMetrics:
    """Cost counters.

    ``consensus_rounds`` charges 2 per push-sum instance and 1 per instance of
    any other protocol.  ``consensus_instances`` counts scalar consensus runs
    regardless of protocol.  ``scalar_messages`` counts per-edge scalar
    transmissions; ``wall_rounds`` counts synchronous barriers.
    """

    consensus_rounds: int = 0
    consensus_instances: int = 0
    scalar_messages: int = 0
    wall_rounds: int = 0

    def snapshot(self):
        return RoundMetrics(**asdict(self))

    def as_row(self, t):
        return {"t": t, "consensus_rounds": self.consensus_rounds,
                "scalar_messages": self.scalar_messages, "wall_rounds": self.wall_rounds}


def rng_stream(seed, purpose, node=0, t=0):
    """Independent generator for a ``(purpose, node, time)`` stream under ``seed``."""
    key = (zlib.crc32(str(purpose).encode()), int(node), int(t))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def _payload_size(payload):
    arr = np.asarray(payload)
    return arr.size * (2 if np.iscomplexobj(arr) else 1)


@dataclass
class Network:
    graph: object
    states: list
    metrics: RoundMetrics = field(default_factory=RoundMetrics)

    @classmethod
    def create(cls, graph, init=None):
        init = init or (lambda i: {})
        return cls(graph, [init(i) for i in range(graph.n_nodes)])

    def neighbor_sets(self):
        return [set(s) for s in self.graph.neighbor_sets()]


def run_round(net, send, receive):
    """Advance every node by one synchronous round.

    ``send(i, state) -> {j: payload}`` is called for all nodes before any
    ``receive(i, state, inbox) -> new_state``; ``inbox`` maps sender to
    payload.  Returns the network (mutated in place).
    """
    nbrs = net.neighbor_sets()
    inboxes = [{} for _ in net.states]
    sent = 0
    for i, state in enumerate(net.states):
        out = send(i, state) or {}
        for j, payload in out.items():
            if j not in nbrs[i]:
                raise LocalityViolation(f"node {i} tried to message non-neighbor {j}")
            inboxes[j][i] = payload
            sent += _payload_size(payload)
    net.states = [receive(i, state, inboxes[i]) for i, state in enumerate(net.states)]
    net.metrics.wall_rounds += 1
    net.metrics.scalar_messages += sent
    return net


def metrics_snapshot(net):
    return net.metrics.snapshot()


def mp_push_sum(graph, values, gamma):
    """Push-sum executed through :func:`run_round` (one scalar pair per edge direction).

    Matches :func:`deig.consensus.push_sum`; exists to check that the matrix
    form only uses neighbor information.
    """
    n = graph.n_nodes
    net = Network.create(graph, lambda i: {"s": float(values[i]), "w": 1.0, "deg": len(graph.neighbors(i))})

    def send(i, st):
        share = (st["s"] / st["deg"], st["w"] / st["deg"])
        return {j: share for j in graph.neighbors(i)}

    def receive(i, st, inbox):
        return {**st, "s": sum(p[0] for p in inbox.values()), "w": sum(p[1] for p in inbox.values())}

    for _ in range(gamma):
        run_round(net, send, receive)
    return np.array([n * st["s"] / st["w"] for st in net.states]), net.metrics


def mp_average_consensus(graph, values, gamma, epsilon):
    """Average consensus through :func:`run_round`; each node sends ``s_i`` to its neighbors."""
    n = graph.n_nodes
    net = Network.create(graph, lambda i: {"s": float(values[i])})

    def send(i, st):
        return {j: st["s"] for j in graph.neighbors(i)}

    def receive(i, st, inbox):
        return {"s": st["s"] + epsilon * sum(v - st["s"] for v in inbox.values())}

    for _ in range(gamma):
        run_round(net, send, receive)
    return np.array([n * st["s"] for st in net.states]), net.metrics


def write_metrics_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

"""Message-passing substrate: locality, counting, and agreement with the matrix forms."""

import csv

import numpy as np
import pytest

from deig.consensus import average_consensus, push_sum
from deig.errors import LocalityViolation
from deig.graph import benchmark10_graph
from deig.netsim import (
    Network,
    NodeState,
    RoundMetrics,
    mp_average_consensus,
    mp_push_sum,
    rng_stream,
    run_round,
    write_metrics_csv,
)


class TestRounds:
    def test_locality_enforced(self):
        g = benchmark10_graph()
        net = Network.create(g)
        far = next(j for j in range(10) if j != 0 and j not in g.neighbors(0))
        with pytest.raises(LocalityViolation):
            run_round(net, lambda i, st: {far: 1.0} if i == 0 else {}, lambda i, st, inbox: st)

    def test_counts_scalars(self):
        g = benchmark10_graph()
        net = Network.create(g)
        run_round(net, lambda i, st: {j: np.array([1.0, 2.0]) for j in g.neighbors(i)},
                  lambda i, st, inbox: st)
        assert net.metrics.scalar_messages == 2 * 2 * g.n_edges
        assert net.metrics.wall_rounds == 1

    def test_complex_payload_counts_double(self):
        g = benchmark10_graph()
        net = Network.create(g)
        run_round(net, lambda i, st: {j: 1j for j in g.neighbors(i)}, lambda i, st, inbox: st)
        assert net.metrics.scalar_messages == 2 * 2 * g.n_edges

    def test_inbox_holds_neighbor_payloads(self):
        g = benchmark10_graph()
        net = Network.create(g, lambda i: {"id": i})
        seen = {}

        def receive(i, st, inbox):
            seen[i] = sorted(inbox)
            return st

        run_round(net, lambda i, st: {j: st["id"] for j in g.neighbors(i)}, receive)
        assert all(seen[i] == g.neighbors(i) for i in range(10))


class TestProtocols:
    def test_push_sum_matches_matrix_form(self):
        g = benchmark10_graph()
        x = np.random.default_rng(0).normal(size=10)
        est, metrics = mp_push_sum(g, x, 25)
        np.testing.assert_allclose(est, push_sum(g, x, 25).estimates, rtol=1e-12)
        assert metrics.scalar_messages == push_sum(g, x, 25).scalar_messages

    def test_average_consensus_matches_matrix_form(self):
        g = benchmark10_graph()
        x = np.random.default_rng(1).normal(size=10)
        est, metrics = mp_average_consensus(g, x, 25, 0.25)
        np.testing.assert_allclose(est, average_consensus(g, x, 25, 0.25).estimates, rtol=1e-12)
        assert metrics.wall_rounds == 25


class TestState:
    def test_initial_state(self):
        st = NodeState.initial(2, 5)
        np.testing.assert_allclose(st.u_row_curr, np.eye(5)[2])
        assert st.storage_floats() == 6 * 5

    def test_rng_streams_independent_and_repeatable(self):
        a = rng_stream(7, "x", node=1, t=3).normal(size=4)
        b = rng_stream(7, "x", node=1, t=3).normal(size=4)
        c = rng_stream(7, "x", node=2, t=3).normal(size=4)
        np.testing.assert_array_equal(a, b)
        assert not np.allclose(a, c)

    def test_metrics_csv(self, tmp_path):
        m = RoundMetrics(consensus_rounds=4, scalar_messages=10, wall_rounds=2)
        path = tmp_path / "m.csv"
        write_metrics_csv(path, [m.as_row(1)])
        rows = list(csv.DictReader(open(path)))
        assert rows == [{"t": "1", "consensus_rounds": "4", "scalar_messages": "10", "wall_rounds": "2"}]

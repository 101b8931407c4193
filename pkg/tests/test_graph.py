"""Graph model: matrix views, edits, generators and visitation protocol."""

import numpy as np
import pytest

from deig.errors import (
    ConnectivityRetryExhausted,
    Disconnected,
    InfeasibleParameters,
    IsolatedNode,
    ParseError,
)
from deig.graph import (
    EdgeEvent,
    EdgeKind,
    Graph,
    benchmark10_graph,
    gen_d_regular,
    gen_small_world,
    node_failure_events,
    node_join_events,
    node_leave_events,
    node_sequence_protocol,
    one_hop_tables,
    random_edge_events,
    rank_two_laplacian_vectors,
    subarray6_graph,
)
from deig.netsim import rng_stream


def complete(n):
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path(n):
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


class TestViews:
    def test_complete_graph_spectrum(self):
        np.testing.assert_allclose(np.linalg.eigvalsh(complete(3).laplacian()), [0.0, 3.0, 3.0], atol=1e-14)

    def test_laplacian_from_incidence(self):
        g = benchmark10_graph()
        b = g.incidence()
        np.testing.assert_allclose(b @ b.T, g.laplacian())

    def test_incidence_signs(self):
        b = path(3).incidence()
        np.testing.assert_allclose(b, [[1, 0], [-1, 1], [0, -1]])

    def test_normalized_adjacency_top_eigenvalue(self):
        vals = np.linalg.eigvalsh(benchmark10_graph().normalized_adjacency())
        assert vals[-1] == pytest.approx(1.0)

    def test_sym_normalized_laplacian(self):
        g = benchmark10_graph()
        d = g.degrees()
        expected = np.eye(10) - g.adjacency() / np.sqrt(np.outer(d, d))
        np.testing.assert_allclose(g.sym_normalized_laplacian(), expected)

    def test_isolated_node_rejected(self):
        g = Graph.from_edges(3, [(0, 1)])
        with pytest.raises(IsolatedNode):
            g.normalized_adjacency()

    def test_no_self_loops(self):
        with pytest.raises(ValueError):
            Graph.from_edges(3, [(1, 1)])

    def test_benchmark10_distinct_eigenvalues(self):
        vals = np.linalg.eigvalsh(benchmark10_graph().laplacian())
        distinct = np.unique(np.round(vals[vals > 1e-9], 9))
        assert distinct.size == 5

    def test_subarray6_neighbors(self):
        g = subarray6_graph()
        assert [g.neighbors(i) for i in range(6)] == [[1, 2], [0, 2], [0, 1, 3], [2, 4, 5], [3, 5], [3, 4]]


class TestEdits:
    def test_add_remove_roundtrip(self):
        g = path(4)
        h = g.add_edge(0, 3).remove_edge(0, 3)
        assert h.edges == g.edges
        assert h.generation == g.generation + 2

    def test_event_vector(self):
        ev = EdgeEvent(EdgeKind.REMOVE, (2, 0))
        assert ev.edge == (0, 2)
        assert ev.rho == -1.0
        np.testing.assert_allclose(ev.b(3), [1.0, 0.0, -1.0])

    def test_event_laplacian_update(self):
        g = path(4)
        ev = EdgeEvent(EdgeKind.ADD, (0, 3))
        b = ev.b(4)
        np.testing.assert_allclose(g.apply(ev).laplacian(), g.laplacian() + ev.rho * np.outer(b, b))

    def test_duplicate_edge_rejected(self):
        with pytest.raises(ValueError):
            path(3).add_edge(0, 1)

    def test_text_roundtrip(self):
        g = benchmark10_graph()
        assert Graph.from_text(g.to_text()).edges == g.edges

    def test_text_errors(self):
        with pytest.raises(ParseError) as exc:
            Graph.from_text("nodes 3\n0 1\n0 x\n")
        assert exc.value.line == 3
        with pytest.raises(ParseError):
            Graph.from_text("0 1\n")


class TestGenerators:
    def test_d_regular(self):
        g = gen_d_regular(50, 4, seed=0)
        assert np.all(g.degrees() == 4)
        assert g.n_edges == 100
        assert g.is_connected()

    def test_d_regular_deterministic(self):
        assert gen_d_regular(20, 3, seed=5).edges == gen_d_regular(20, 3, seed=5).edges

    def test_d_regular_infeasible(self):
        with pytest.raises(InfeasibleParameters):
            gen_d_regular(5, 3, seed=0)

    def test_small_world(self):
        g = gen_small_world(80, 6, 0.1, seed=0)
        assert g.n_nodes == 80
        assert g.n_edges == 240
        assert g.is_connected()

    def test_small_world_infeasible(self):
        with pytest.raises(InfeasibleParameters):
            gen_small_world(10, 3, 0.1, seed=0)

    def test_retry_exhausted(self, monkeypatch):
        import deig.graph as graph_mod

        monkeypatch.setattr(graph_mod.nx, "random_regular_graph", lambda d, n, seed: graph_mod.nx.empty_graph(n))
        with pytest.raises(ConnectivityRetryExhausted):
            gen_d_regular(10, 2, seed=0)


class TestNodeSequence:
    def test_covers_every_edge_once(self):
        g = gen_d_regular(30, 4, seed=2)
        order = node_sequence_protocol(g)
        assert len(order) == g.n_edges
        assert {tuple(sorted(e)) for e in order} == set(g.edges)

    def test_path_order(self):
        assert node_sequence_protocol(path(4)) == [(0, 1), (1, 2), (2, 3)]

    def test_heads_are_neighbors_of_earlier_heads(self):
        order = node_sequence_protocol(benchmark10_graph(), start=3)
        assert order[0][0] == 3
        seen = {3}
        for head, tail in order:
            assert head in seen
            seen.add(tail)

    def test_disconnected(self):
        with pytest.raises(Disconnected):
            node_sequence_protocol(Graph.from_edges(4, [(0, 1), (2, 3)]))


class TestRankTwo:
    def test_columns_rebuild_laplacian(self):
        g = benchmark10_graph()
        lap = g.laplacian()
        total = np.zeros_like(lap)
        for t in range(g.n_nodes):
            xt, xb = rank_two_laplacian_vectors(lap, t)
            total += np.outer(xt, xt) - np.outer(xb, xb)
            # telescoping: the first t+1 rows and columns are already final
            np.testing.assert_allclose(total[: t + 1], lap[: t + 1], atol=1e-12)
        np.testing.assert_allclose(total, lap, atol=1e-12)

    def test_isolated_node(self):
        with pytest.raises(IsolatedNode):
            rank_two_laplacian_vectors(np.zeros((2, 2)), 0)


class TestNodeVariation:
    def test_join_then_leave(self):
        g = Graph.from_edges(4, [(0, 1), (1, 2)])
        joins = node_join_events(g, 3, [0, 2])
        assert [e.edge for e in joins] == [(0, 3), (2, 3)]
        for ev in joins:
            g = g.apply(ev)
        assert g.is_connected()
        leaves = node_leave_events(g, 3)
        assert all(e.kind is EdgeKind.REMOVE for e in leaves)
        for ev in leaves:
            g = g.apply(ev)
        assert g.neighbors(3) == []

    def test_failure_uses_tables(self):
        g = benchmark10_graph()
        events = node_failure_events(one_hop_tables(g), failed=0)
        assert sorted(e.edge for e in events) == sorted((min(0, j), max(0, j)) for j in g.neighbors(0))

    def test_random_events_keep_connectivity(self):
        g = gen_d_regular(20, 4, seed=0)
        events, graphs = random_edge_events(g, 30, rng_stream(0, "test"))
        assert len(events) == 30
        assert all(h.is_connected() for h in graphs)

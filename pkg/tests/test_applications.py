"""Covariance tracking, ESPRIT, spectrum estimation and graph filters."""

import csv

import numpy as np
import pytest

from deig.applications.covariance import CovarianceScenario, run_covariance, true_covariance
from deig.applications.doa import (
    DoaScenario,
    SubarrayGeometry,
    angles_from_psi,
    associate,
    crossing_tracks,
    esprit_centralized,
    random_geometry,
    run_doa_estimate,
    run_doa_track,
    steering,
)
from deig.applications.filters import (
    DESIGNS,
    FILTER_COLUMNS,
    design_filter,
    distinct_frequencies,
    filter_rows,
    run_filter,
    run_filter_design,
    write_filter_csv,
)
from deig.applications.spectrum import (
    SPECTRUM_COLUMNS,
    SpectrumScenario,
    incidence_vectors,
    random_event_scenario,
    rank_two_vectors,
    reference_spectrum,
    run_spectrum,
    target_matrix,
    write_spectrum_csv,
)
from deig.errors import AngleOutOfRange, Disconnected
from deig.graph import EdgeEvent, EdgeKind, Graph, benchmark10_graph, gen_d_regular, subarray6_graph
from deig.tracker import exact_config, make_tracker


class TestCovariance:
    @pytest.mark.parametrize("mode", ["finite", "ewma", "window"])
    def test_exact_matches_central(self, mode):
        scen = CovarianceScenario(mode=mode, T=40, alpha=0.9, beta=8)
        rep = run_covariance(scen, make_tracker(benchmark10_graph(), exact_config()))
        np.testing.assert_allclose(rep.lam_est, rep.lam_central, atol=1e-10)
        assert rep.disagreement.max() == 0.0

    def test_finite_converges_to_truth(self):
        scen = CovarianceScenario(mode="finite", T=400, seed=1)
        rep = run_covariance(scen, make_tracker(benchmark10_graph(), exact_config()))
        assert rep.eta[-1].max() < 0.5
        np.testing.assert_allclose(rep.eta[-1], rep.eta_tilde[-1], atol=1e-10)

    def test_true_covariance(self):
        cov, lam = true_covariance(4, spectrum=[1.0, 4.0, 2.0, 3.0])
        np.testing.assert_allclose(np.linalg.eigvalsh(cov)[::-1], lam)
        np.testing.assert_allclose(lam, [4.0, 3.0, 2.0, 1.0])

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            CovarianceScenario(mode="sliding")


class TestEsprit:
    def test_psi_one_is_broadside(self):
        np.testing.assert_allclose(angles_from_psi([1.0]), [0.0], atol=1e-12)

    def test_psi_roundtrip(self):
        psi = np.exp(-2j * np.pi * 0.5 * np.sin(np.deg2rad(30.0)))
        np.testing.assert_allclose(angles_from_psi([psi]), [30.0])

    def test_out_of_range(self):
        with pytest.raises(AngleOutOfRange):
            angles_from_psi([np.exp(1j * 0.9 * np.pi)], delta=0.2)

    def test_noiseless_central(self):
        geom = random_geometry(6, seed=0)
        a = steering(geom, [-7.0, 19.0, 23.0])
        cov = a @ a.conj().T + 1e-6 * np.eye(12)
        np.testing.assert_allclose(esprit_centralized(cov, 3), [-7.0, 19.0, 23.0], atol=1e-4)

    def test_lower_antenna_offset(self):
        geom = SubarrayGeometry(np.zeros((1, 2)), delta=0.5)
        a = steering(geom, 30.0)[:, 0]
        np.testing.assert_allclose(a[1] / a[0], np.exp(-2j * np.pi * 0.5 * 0.5))

    def test_distributed_exact_equals_central(self):
        scen = DoaScenario(T=60, seed=2)
        res = run_doa_estimate(scen, random_geometry(6, 0), subarray6_graph(), exact_config(), trials=3)
        np.testing.assert_allclose(res.estimates, np.broadcast_to(res.central[:, None, :], res.estimates.shape),
                                   atol=1e-8)
        assert res.rmse == pytest.approx(res.rmse_central, rel=1e-8)
        assert len(res.rows) == 3 * 6 * 3

    def test_tracking_exact_equals_central(self):
        scen = DoaScenario(T=30, trajectory=crossing_tracks(30), seed=1)
        res = run_doa_track(scen, random_geometry(6, 0), subarray6_graph(), exact_config())
        np.testing.assert_allclose(res.estimates[5:], np.broadcast_to(res.central[5:, None, :],
                                                                      res.estimates[5:].shape), atol=1e-6)

    def test_associate(self):
        np.testing.assert_allclose(associate(np.array([10.0, -10.0]), np.array([-9.0, 9.0])), [9.0, -9.0])


class TestSpectrum:
    def test_incidence_vectors_build_laplacian(self):
        g = benchmark10_graph()
        total = sum(np.outer(x, x) for x in incidence_vectors(g))
        np.testing.assert_allclose(total, g.laplacian())

    def test_normalized_vectors(self):
        g = benchmark10_graph()
        total = sum(np.outer(x, x) for x in incidence_vectors(g, normalized=True))
        np.testing.assert_allclose(total, target_matrix(g, normalized=True), atol=1e-14)

    def test_rank_two_vectors(self):
        g = benchmark10_graph()
        total = sum(np.outer(p, p) - np.outer(m, m) for p, m in rank_two_vectors(g))
        np.testing.assert_allclose(total, g.laplacian(), atol=1e-12)

    @pytest.mark.parametrize("learning", ["incidence", "rank-two"])
    def test_learning_exact(self, learning):
        g = gen_d_regular(20, 4, seed=0)
        res = run_spectrum(SpectrumScenario(g, learning=learning), consensus=exact_config())
        np.testing.assert_allclose(res.lam_est[-1], reference_spectrum(g), atol=1e-10)

    def test_events_exact(self):
        scen = random_event_scenario(gen_d_regular(20, 4, seed=0), 10, seed=1)
        res = run_spectrum(scen, consensus=exact_config())
        # during learning the reference is the full target; compare from the last learning step on
        tail = slice(res.learning_steps - 1, None)
        np.testing.assert_allclose(res.lam_est[tail], res.lam_true[tail], atol=1e-10)
        assert res.lam_est.shape[0] == res.learning_steps + 10

    def test_disconnecting_event(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2)])
        scen = SpectrumScenario(g, events=(EdgeEvent(EdgeKind.REMOVE, (0, 1)),))
        with pytest.raises(Disconnected):
            run_spectrum(scen, consensus=exact_config())

    def test_normalized_needs_incidence(self):
        with pytest.raises(ValueError):
            SpectrumScenario(benchmark10_graph(), learning="rank-two", normalized=True)

    def test_csv(self, tmp_path):
        g = Graph.from_edges(3, [(0, 1), (1, 2)])
        res = run_spectrum(SpectrumScenario(g), consensus=exact_config())
        out = tmp_path / "s.csv"
        write_spectrum_csv(out, res.rows())
        rows = list(csv.DictReader(open(out)))
        assert tuple(rows[0]) == SPECTRUM_COLUMNS
        assert len(rows) == 2 * 3


class TestFilters:
    def test_distinct_frequencies(self):
        np.testing.assert_allclose(distinct_frequencies([0.0, 1.0, 1.0 + 1e-12, 3.0]), [0.0, 1.0, 3.0])

    def test_complete_graph_laplacian_filter(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
        x = np.array([1.0, 2.0, 6.0])
        run = run_filter(g, x, design_filter("GDL", g, 1), "GDL")
        assert run.final_error < 1e-12

    def test_graph_dependent_beats_independent(self):
        g = gen_d_regular(30, 4, seed=0)
        runs = run_filter_design(g, K=8)
        assert set(runs) == set(DESIGNS)
        assert runs["GDL"].final_error < runs["GIDN"].final_error

    def test_unknown_design(self):
        with pytest.raises(ValueError):
            design_filter("GXX", benchmark10_graph(), 3)

    def test_csv(self, tmp_path):
        runs = run_filter_design(benchmark10_graph(), K=4)
        out = tmp_path / "f.csv"
        write_filter_csv(out, filter_rows(runs))
        rows = list(csv.DictReader(open(out)))
        assert tuple(rows[0]) == FILTER_COLUMNS
        assert len(rows) == 4 * 5

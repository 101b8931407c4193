"""End-to-end acceptance checks, one test per criterion.

Reference values come from independent oracles: the Jacobi eigensolver, a
centrally maintained matrix, centralized ESPRIT and exact graph spectra.
"""

import time

import numpy as np

from deig.applications.covariance import CovarianceScenario, run_covariance
from deig.applications.doa import DoaScenario, crossing_tracks, random_geometry, run_doa_estimate, run_doa_track
from deig.applications.filters import run_filter_design
from deig.applications.spectrum import (
    SpectrumScenario,
    random_event_scenario,
    reference_spectrum,
    run_spectrum,
)
from deig.consensus import ConsensusConfig, Protocol, distinct_nonzero, ft_average_consensus
from deig.graph import benchmark10_graph, gen_d_regular, gen_small_world, subarray6_graph
from deig.linalg import RankOneUpdate, rank_one_eigenupdate
from deig.linalg.oracle import dense_eig_oracle
from deig.tracker import exact_config, gather_global, make_tracker, tracker_rank_two_step, tracker_step

DOA_SOURCES = (-7.0, 19.0, 23.0)


def random_rank_one(rng, trial):
    n = int(rng.integers(1, 17))
    vals = rng.normal(size=n)
    if trial % 3 == 0:
        vals = np.round(vals)  # repeated eigenvalues
    z = rng.normal(size=n)
    if trial % 2:
        z = z + 1j * rng.normal(size=n)
    if trial % 5 == 0:
        z[rng.random(n) < 0.3] = 0
    rho = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 3.0)
    return vals, z, rho


def interlaces(old, new, rho, tol):
    old = np.sort(old)[::-1]
    if rho < 0:
        old, new = -old[::-1], -new[::-1]
    upper = np.concatenate([[np.inf], old[:-1]])
    return np.all(new >= old - tol) and np.all(new <= upper + tol)


class TestAcceptance:
    def test_c1_secular_solver(self):
        rng = np.random.default_rng(0)
        start = time.perf_counter()
        worst_eig, worst_trace, interlace_ok = 0.0, 0.0, 0
        for trial in range(1000):
            vals, z, rho = random_rank_one(rng, trial)
            lam, _ = rank_one_eigenupdate(vals, RankOneUpdate(rho, z))
            ref, _ = dense_eig_oracle(np.diag(vals) + rho * np.outer(z, z.conj()))
            worst_eig = max(worst_eig, np.abs(lam - ref).max())
            expected = vals.sum() + rho * np.vdot(z, z).real
            scale = np.abs(vals).sum() + abs(rho) * np.vdot(z, z).real
            worst_trace = max(worst_trace, abs(lam.sum() - expected) / max(scale, 1e-300))
            interlace_ok += interlaces(vals, lam, rho, 1e-12 * (1 + scale))
        elapsed = time.perf_counter() - start
        assert worst_eig < 1e-9
        assert interlace_ok == 1000
        assert worst_trace < 1e-10
        assert elapsed < 10.0

    def test_c2_tracker_oracle_replay(self):
        start = time.perf_counter()
        rng = np.random.default_rng(1)
        g = gen_d_regular(8, 3, seed=0)
        net = make_tracker(g, exact_config())
        r = np.zeros((8, 8))
        worst_eig, worst_orth = 0.0, 0.0
        for _ in range(40):
            x = rng.normal(size=8)
            rho = float(rng.choice([-1.0, 1.0]))
            tracker_step(net, x, rho=rho)
            r += rho * np.outer(x, x)
            lam, u = gather_global(net)
            worst_eig = max(worst_eig, np.abs(lam - dense_eig_oracle(r)[0]).max())
            worst_orth = max(worst_orth, np.abs(u.T @ u - np.eye(8)).max())
        assert worst_eig < 1e-8
        assert worst_orth < 1e-8
        assert time.perf_counter() - start < 5.0

    def test_c3_cost_model(self):
        g = benchmark10_graph()
        n, T = g.n_nodes, 7
        rng = np.random.default_rng(2)
        net = make_tracker(g, ConsensusConfig(Protocol.PS, 20))
        for _ in range(T):
            tracker_step(net, rng.normal(size=n))
        assert net.metrics.consensus_rounds == 2 * n * T

        before = net.metrics.snapshot()
        tracker_rank_two_step(net, rng.normal(size=n), rng.normal(size=n))
        window_rounds = net.metrics.consensus_rounds - before.consensus_rounds
        window_instances = net.metrics.consensus_instances - before.consensus_instances
        assert window_instances == 2 * n
        # published per-window figure, counted the same way as the 2NT total
        assert window_rounds == 2 * n

    def test_c4_finite_time_consensus(self):
        g = benchmark10_graph()
        eigs = distinct_nonzero(np.linalg.eigvalsh(g.laplacian()))
        x = np.random.default_rng(3).normal(size=10)
        out = ft_average_consensus(g, x, eigs)
        assert out.iterations == 5
        assert np.abs(out.estimates - x.sum()).max() < 1e-9

        scen = CovarianceScenario(mode="finite", T=100, seed=0)
        errors = {}
        for name, cfg in [("ftAC", ConsensusConfig(Protocol.FTAC, distinct_eigenvalues=eigs)),
                          ("AC", ConsensusConfig(Protocol.AC, 10)),
                          ("PS", ConsensusConfig(Protocol.PS, 10))]:
            rep = run_covariance(scen, make_tracker(g, cfg))
            errors[name] = float(np.mean(rep.eta[-1]))
        assert errors["ftAC"] < errors["AC"]
        assert errors["ftAC"] < errors["PS"]

    def test_c5_doa_estimation(self):
        start = time.perf_counter()
        g = subarray6_graph()
        geom = random_geometry(6, seed=0)
        for snr in (0.0, 10.0, 20.0):
            res = run_doa_estimate(DoaScenario(DOA_SOURCES, snr_db=snr, T=200), geom, g, exact_config(), trials=100)
            assert abs(res.rmse - res.rmse_central) <= 0.05 * res.rmse_central, snr
        ps = run_doa_estimate(DoaScenario(DOA_SOURCES, snr_db=20.0, T=200), geom, g,
                              ConsensusConfig(Protocol.PS, 15), trials=100)
        elapsed = time.perf_counter() - start
        assert ps.rmse <= 2.0 * ps.rmse_central
        assert elapsed < 120.0

    def test_c6_doa_tracking(self):
        scen = DoaScenario(snr_db=20.0, T=200, alpha=0.88, seed=0, trajectory=crossing_tracks(200, 20.0))
        res = run_doa_track(scen, random_geometry(6, seed=0), subarray6_graph(), ConsensusConfig(Protocol.PS, 15))
        assert res.rmse <= 2.0

    def test_c7_spectrum_learning(self):
        g = gen_d_regular(50, 4, seed=0)
        ref = reference_spectrum(g)
        inc = run_spectrum(SpectrumScenario(g, learning="incidence"), consensus=exact_config())
        assert inc.learning_steps == 100
        assert np.abs(inc.lam_est[-1] - ref).max() < 1e-8
        two = run_spectrum(SpectrumScenario(g, learning="rank-two"), consensus=exact_config())
        assert two.learning_steps == 50
        assert np.abs(two.lam_est[-1] - ref).max() < 1e-8

        events = run_spectrum(random_event_scenario(g, 20, seed=0), consensus=exact_config())
        after = events.eta[events.learning_steps:]
        assert after.size == 20
        assert after.max() < 1e-6

    def test_c8_filter_design(self):
        g = gen_small_world(80, 6, 0.1, seed=0)
        runs = run_filter_design(g, K=12, seed=0)
        assert runs["GIDN"].final_error > 1e-1
        assert runs["GDnA"].peak_magnitude < runs["GDL"].peak_magnitude
        assert runs["GDnA"].final_error < 1e-6
        assert runs["GDL"].final_error < 1e-6

    def test_c9_published_curve_shapes(self):
        # covariance tracking: more push-sum iterations track the central replay more closely
        g = benchmark10_graph()
        scen = CovarianceScenario(mode="finite", T=60, seed=0)
        err = {gamma: float(np.mean(run_covariance(scen, make_tracker(g, ConsensusConfig(Protocol.PS, gamma)))
                                    .eta_vs_central[-1]))
               for gamma in (20, 100)}
        assert err[100] <= err[20]

        # spectrum learning: push-sum recovers the top eigenvalue; rounds grow as 2 N N_e
        rounds = {}
        for n in (20, 50):
            graph = gen_d_regular(n, 4, seed=0)
            net = make_tracker(graph, ConsensusConfig(Protocol.PS, 100))
            res = run_spectrum(SpectrumScenario(graph), net=net)
            assert res.eta[res.learning_steps - 1] < 1e-6
            rounds[n] = net.metrics.consensus_rounds
            assert rounds[n] == 2 * n * graph.n_edges
        assert rounds[50] > rounds[20]

        # consensus backends: ftAC tracks the central replay better than AC and PS at a small budget
        eigs = distinct_nonzero(np.linalg.eigvalsh(g.laplacian()))
        vs_central = {}
        for name, cfg in [("ftAC", ConsensusConfig(Protocol.FTAC, distinct_eigenvalues=eigs)),
                          ("AC", ConsensusConfig(Protocol.AC, 10)),
                          ("PS", ConsensusConfig(Protocol.PS, 10))]:
            vs_central[name] = float(np.mean(run_covariance(scen, make_tracker(g, cfg)).eta_vs_central[-1]))
        assert vs_central["ftAC"] < min(vs_central["AC"], vs_central["PS"])

        # filters: graph-dependent designs beat graph-independent ones
        runs = run_filter_design(gen_small_world(80, 6, 0.1, seed=0), K=12, seed=0)
        assert max(runs["GDnA"].final_error, runs["GDL"].final_error) < min(runs["GIDN"].final_error,
                                                                            runs["GIDM"].final_error)

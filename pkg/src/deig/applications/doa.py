"""Distributed ESPRIT direction-of-arrival estimation and tracking.

Each node is a subarray with one antenna in the upper group and its partner,
displaced by ``delta`` wavelengths along the x axis, in the lower group.
Vector entries are interleaved per node: entry ``2i`` is node ``i``'s upper
antenna and entry ``2i + 1`` its lower antenna.

With an antenna at ``(x, y)`` a source at angle ``theta`` contributes the phase
``exp(-j 2 pi (x sin(theta) + y cos(theta)))``, so the lower/upper ratio is
``psi = exp(-j 2 pi delta sin(theta))`` and ``theta = arcsin(-arg(psi) / (2 pi delta))``.
"""

from dataclasses import dataclass, field

import numpy as np

from deig.consensus import nc_weighted_sum
from deig.errors import AngleOutOfRange, SingularC
from deig.linalg.oracle import small_general_eig
from deig.netsim import RoundMetrics, rng_stream
from deig.tracker import make_tracker, tracker_step

DOA_COLUMNS = ("trial", "t", "source", "theta_true", "theta_est", "node_id")
C_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class SubarrayGeometry:
    positions: np.ndarray  # (N, 2) reference antenna per subarray, wavelengths
    delta: float = 0.5

    @property
    def n_subarrays(self):
        return self.positions.shape[0]

    @property
    def owners(self):
        return np.repeat(np.arange(self.n_subarrays), 2)

    def antenna_positions(self):
        pos = np.repeat(self.positions, 2, axis=0).astype(float)
        pos[1::2, 0] += self.delta
        return pos


def random_geometry(n_subarrays, seed, radius=3.0, delta=0.5):
    """Subarray reference points uniform in a disc of ``radius`` wavelengths."""
    rng = rng_stream(seed, "doa-geometry")
    r = radius * np.sqrt(rng.random(n_subarrays))
    phi = 2 * np.pi * rng.random(n_subarrays)
    return SubarrayGeometry(np.column_stack([r * np.cos(phi), r * np.sin(phi)]), delta)


def steering(geometry, theta_deg):
    """Array response, shape ``(2N, n_sources)``."""
    th = np.deg2rad(np.atleast_1d(np.asarray(theta_deg, dtype=float)))
    pos = geometry.antenna_positions()
    phase = pos[:, :1] * np.sin(th)[None, :] + pos[:, 1:] * np.cos(th)[None, :]
    return np.exp(-2j * np.pi * phase)


def snapshot(geometry, theta_deg, snr_db, rng):
    """One array snapshot: unit-power sources plus white noise at the given SNR."""
    a = steering(geometry, theta_deg)
    n_src = a.shape[1]
    s = (rng.standard_normal(n_src) + 1j * rng.standard_normal(n_src)) / np.sqrt(2.0)
    sigma = np.sqrt(10.0 ** (-snr_db / 10.0))
    m = a.shape[0]
    noise = sigma * (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
    return a @ s + noise


def angles_from_psi(psi_eigs, delta=0.5):
    """``theta = arcsin(-arg(psi) / (2 pi delta))`` in degrees."""
    arg = np.angle(np.asarray(psi_eigs))
    ratio = -arg / (2 * np.pi * delta)
    if np.any(np.abs(ratio) > 1 + 1e-12):
        raise AngleOutOfRange(f"|arg(psi)| exceeds 2 pi delta: {arg}")
    return np.rad2deg(np.arcsin(np.clip(ratio, -1.0, 1.0)))


def esprit_from_cf(c, f, delta=0.5):
    """Angles (sorted) from ``C = U_up^H U_up`` and ``F = U_up^H U_low``."""
    if np.linalg.cond(c) > C_CONDITION_LIMIT:
        raise SingularC("ESPRIT Gram matrix is singular")
    psi = np.linalg.solve(c, f)
    return np.sort(angles_from_psi(small_general_eig(psi), delta))


def esprit_centralized(cov, n_sources, delta=0.5):
    """Reference ESPRIT on a full covariance (entries interleaved upper/lower)."""
    vals, vecs = np.linalg.eigh(cov)
    us = vecs[:, ::-1][:, :n_sources]
    up, low = us[0::2], us[1::2]
    return esprit_from_cf(up.conj().T @ up, up.conj().T @ low, delta)


def distributed_esprit(net, n_sources, delta=0.5, metrics=None):
    """Per-node angle estimates from the tracked signal subspace.

    Every node contributes ``conj(u_up) u_up^T`` and ``conj(u_up) u_low^T`` for its
    own rows; the ``n^2`` entries of ``C`` and of ``F`` are each one consensus
    instance.  Returns ``(angles (N, n), failed (N,) bool)``.
    """
    n_nodes = net.graph.n_nodes
    nn = n_sources * n_sources
    sc = np.zeros((n_nodes, nn), dtype=complex)
    sf = np.zeros((n_nodes, nn), dtype=complex)
    for i, st in enumerate(net.nodes):
        rows = st.u_row_curr[:, :n_sources]  # (2, n): upper row then lower row
        up, low = rows[0], rows[1]
        sc[i] = np.outer(up.conj(), up).ravel()
        sf[i] = np.outer(up.conj(), low).ravel()
    metrics = metrics if metrics is not None else net.metrics
    c_all = nc_weighted_sum(net.graph, sc, net.consensus, metrics).estimates
    f_all = nc_weighted_sum(net.graph, sf, net.consensus, metrics).estimates
    angles = np.full((n_nodes, n_sources), np.nan)
    failed = np.zeros(n_nodes, dtype=bool)
    for i in range(n_nodes):
        c = c_all[i].reshape(n_sources, n_sources)
        f = f_all[i].reshape(n_sources, n_sources)
        try:
            angles[i] = esprit_from_cf(c, f, delta)
        except (SingularC, AngleOutOfRange):
            failed[i] = True
    return angles, failed


@dataclass(frozen=True)
class DoaScenario:
    sources: tuple = (-7.0, 19.0, 23.0)  # static angles, degrees
    snr_db: float = 20.0
    T: int = 200
    alpha: float | None = None  # None: running sample mean
    seed: int = 0
    trajectory: object = None  # callable t -> angles (tracking); overrides sources

    @property
    def n_sources(self):
        return len(self.angles_at(1))

    def angles_at(self, t):
        if self.trajectory is not None:
            return np.asarray(self.trajectory(t), dtype=float)
        return np.asarray(self.sources, dtype=float)


def crossing_tracks(T=200, span=20.0):
    """Two sources moving linearly from ``-span``/``+span`` to ``+span``/``-span``."""

    def angles(t):
        frac = (t - 1) / max(T - 1, 1)
        a = -span + 2 * span * frac
        return np.array([a, -a])

    return angles


@dataclass
class DoaResult:
    rmse: float
    rmse_central: float
    estimates: np.ndarray  # (trials, nodes, n) for static, (T, nodes, n) for tracking
    central: np.ndarray
    truth: np.ndarray
    failed_trials: int = 0
    metrics: RoundMetrics = field(default_factory=RoundMetrics)
    rows: list = field(default_factory=list)


def _pooled_rmse(est, truth):
    """Pool squared errors over everything after sorting both per estimate."""
    est = np.sort(est, axis=-1)
    truth = np.sort(np.broadcast_to(truth, est.shape), axis=-1)
    err = est - truth
    ok = np.isfinite(err)
    return float(np.sqrt(np.mean(err[ok] ** 2))) if ok.any() else float("nan")


def run_doa_trial(scenario, geometry, graph, consensus, trial):
    """One Monte Carlo trial of static estimation; returns (per-node, central, metrics)."""
    rng = rng_stream(scenario.seed, "doa-snapshots", node=0, t=trial)
    net = make_tracker(graph, consensus, owners=geometry.owners, complex_field=True)
    m = 2 * geometry.n_subarrays
    cov = np.zeros((m, m), dtype=complex)
    for t in range(1, scenario.T + 1):
        x = snapshot(geometry, scenario.angles_at(t), scenario.snr_db, rng)
        alpha = (t - 1) / t if scenario.alpha is None else scenario.alpha
        tracker_step(net, x, alpha=alpha)
        cov = alpha * cov + (1 - alpha) * np.outer(x, x.conj())
    est, failed = distributed_esprit(net, scenario.n_sources, geometry.delta)
    try:
        central = esprit_centralized(cov, scenario.n_sources, geometry.delta)
    except (SingularC, AngleOutOfRange):
        central = np.full(scenario.n_sources, np.nan)
    return est, failed, central, net.metrics


def run_doa_estimate(scenario, geometry, graph, consensus, trials=100, workers=1):
    """Monte Carlo RMSE of distributed and centralized ESPRIT (pooled over sources, trials, nodes)."""
    args = [(scenario, geometry, graph, consensus, k) for k in range(trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_star, args))
    else:
        results = [run_doa_trial(*a) for a in args]
    est = np.array([r[0] for r in results])
    central = np.array([r[2] for r in results])
    failed = sum(int(r[1].any()) for r in results)
    truth = np.sort(scenario.angles_at(scenario.T))
    total = RoundMetrics()
    for r in results:
        for key in ("consensus_rounds", "consensus_instances", "scalar_messages", "wall_rounds"):
            setattr(total, key, getattr(total, key) + getattr(r[3], key))
    rows = [
        {"trial": k, "t": scenario.T, "source": s, "theta_true": float(truth[s]),
         "theta_est": float(est[k, i, s]), "node_id": i}
        for k in range(trials) for i in range(est.shape[1]) for s in range(est.shape[2])
    ]
    return DoaResult(
        rmse=_pooled_rmse(est, truth),
        rmse_central=_pooled_rmse(central, truth),
        estimates=est,
        central=central,
        truth=truth,
        failed_trials=failed,
        metrics=total,
        rows=rows,
    )


def _trial_star(args):
    return run_doa_trial(*args)


def associate(prev, current):
    """Reorder ``current`` so each entry follows the nearest previous estimate."""
    from itertools import permutations

    if prev is None or not np.all(np.isfinite(prev)):
        return current
    best = min(permutations(range(current.size)), key=lambda p: np.nansum((current[list(p)] - prev) ** 2))
    return current[list(best)]


def run_doa_track(scenario, geometry, graph, consensus, burn_in=0):
    """Track moving sources with a constant forgetting factor.

    Angles are estimated at every step.  Emitted source labels follow the
    nearest previous estimate; the RMSE pools, over all steps from ``burn_in``
    on and all nodes, the error after sorting estimates and truth at each step.
    """
    alpha = 0.88 if scenario.alpha is None else scenario.alpha
    rng = rng_stream(scenario.seed, "doa-track", node=0, t=0)
    net = make_tracker(graph, consensus, owners=geometry.owners, complex_field=True)
    n_src = scenario.n_sources
    m = 2 * geometry.n_subarrays
    cov = np.zeros((m, m), dtype=complex)
    est = np.full((scenario.T, graph.n_nodes, n_src), np.nan)
    central = np.full((scenario.T, n_src), np.nan)
    truth = np.zeros((scenario.T, n_src))
    esprit_metrics = RoundMetrics()
    rows = []
    prev = [None] * graph.n_nodes
    for t in range(1, scenario.T + 1):
        theta = scenario.angles_at(t)
        truth[t - 1] = theta
        x = snapshot(geometry, theta, scenario.snr_db, rng)
        tracker_step(net, x, alpha=alpha)
        cov = alpha * cov + (1 - alpha) * np.outer(x, x.conj())
        angles, failed = distributed_esprit(net, n_src, geometry.delta, metrics=esprit_metrics)
        est[t - 1] = angles
        try:
            central[t - 1] = esprit_centralized(cov, n_src, geometry.delta)
        except (SingularC, AngleOutOfRange):
            pass
        true_sorted = np.sort(theta)
        for i in range(graph.n_nodes):
            labelled = associate(prev[i], angles[i])
            prev[i] = labelled
            for s in range(n_src):
                rows.append({"trial": 0, "t": t, "source": s, "theta_true": float(true_sorted[s]),
                             "theta_est": float(labelled[s]), "node_id": i})
    sl = slice(burn_in, None)
    total = net.metrics.snapshot()
    for key in ("consensus_rounds", "consensus_instances", "scalar_messages", "wall_rounds"):
        setattr(total, key, getattr(total, key) + getattr(esprit_metrics, key))
    return DoaResult(
        rmse=_pooled_rmse(est[sl], truth[sl][:, None, :]),
        rmse_central=_pooled_rmse(central[sl], truth[sl]),
        estimates=est,
        central=central,
        truth=truth,
        failed_trials=int(np.isnan(est).any(axis=(1, 2)).sum()),
        metrics=total,
        rows=rows,
    )

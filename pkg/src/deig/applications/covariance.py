"""Online spectrum estimation of a moving sample covariance matrix.

Three recurrences are supported:

* ``ewma``: ``R(t) = alpha R(t-1) + (1 - alpha) x x^H``,
* ``finite``: the same with ``alpha_t = (t-1)/t``, i.e. the running sample mean,
* ``window``: ``R(t) = R(t-1) + x(t) x(t)^H - x(t-beta) x(t-beta)^H``.
"""

from dataclasses import dataclass, field

import numpy as np

from deig.netsim import rng_stream
from deig.tracker import gather_global, node_spectra, tracker_rank_two_step, tracker_step


@dataclass(frozen=True)
class CovarianceScenario:
    mode: str = "finite"  # finite | ewma | window
    T: int = 100
    alpha: float = 0.95
    beta: int = 20
    true_spectrum: tuple | None = None  # descending; default geometric 10..1
    complex_field: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("finite", "ewma", "window"):
            raise ValueError(f"unknown covariance mode {self.mode!r}")
        if self.mode == "ewma" and not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.mode == "window" and self.beta < 1:
            raise ValueError("window length must be >= 1")


@dataclass
class RelativeErrorReport:
    """Per-step spectra and relative errors, arrays of shape ``(T, N)``.

    ``eta`` compares the tracked spectrum with the true distribution,
    ``eta_tilde`` the centralized replay with the true distribution, and
    ``eta_vs_central`` the tracked spectrum with the centralized replay.
    """

    lam_est: np.ndarray
    lam_central: np.ndarray
    lam_true: np.ndarray
    eta: np.ndarray
    eta_tilde: np.ndarray
    eta_vs_central: np.ndarray
    disagreement: np.ndarray = field(default=None)


def relative_error(est, ref):
    ref = np.asarray(ref, dtype=float)
    return np.abs(np.asarray(est) - ref) / np.abs(ref)


def random_unitary(n, rng, complex_field=False):
    g = rng.standard_normal((n, n))
    if complex_field:
        g = g + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(g)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def true_covariance(n, spectrum=None, seed=0, complex_field=False):
    """Covariance ``Q diag(spectrum) Q^H`` with a seeded random unitary ``Q``."""
    spectrum = np.geomspace(10.0, 1.0, n) if spectrum is None else np.asarray(spectrum, dtype=float)
    if spectrum.size != n:
        raise ValueError("spectrum length must equal the number of nodes")
    q = random_unitary(n, rng_stream(seed, "covariance-basis"), complex_field)
    return (q * spectrum[None, :]) @ q.conj().T, np.sort(spectrum)[::-1]


def sample_stream(cov, T, rng, complex_field=False):
    """``T`` zero-mean Gaussian samples with covariance ``cov`` (rows are samples)."""
    n = cov.shape[0]
    vals, vecs = np.linalg.eigh(cov)
    root = vecs * np.sqrt(np.clip(vals, 0, None))[None, :]
    if complex_field:
        w = (rng.standard_normal((T, n)) + 1j * rng.standard_normal((T, n))) / np.sqrt(2.0)
    else:
        w = rng.standard_normal((T, n))
    return w @ root.T


def run_covariance(scenario, net, samples=None):
    """Stream samples through the tracker and score it every step."""
    n = net.dim
    cov, lam_true = true_covariance(n, scenario.true_spectrum, scenario.seed, scenario.complex_field)
    if samples is None:
        samples = sample_stream(cov, scenario.T, rng_stream(scenario.seed, "covariance-samples"), scenario.complex_field)
    T = samples.shape[0]
    central = np.zeros((n, n), dtype=samples.dtype)
    lam_est = np.zeros((T, n))
    lam_central = np.zeros((T, n))
    spread = np.zeros(T)
    for t in range(1, T + 1):
        x = samples[t - 1]
        outer = np.outer(x, x.conj())
        if scenario.mode == "window":
            if t > scenario.beta:
                old = samples[t - 1 - scenario.beta]
                tracker_rank_two_step(net, x, old)
                central = central + outer - np.outer(old, old.conj())
            else:
                tracker_step(net, x, rho=1.0)
                central = central + outer
        else:
            alpha = (t - 1) / t if scenario.mode == "finite" else scenario.alpha
            tracker_step(net, x, alpha=alpha)
            central = alpha * central + (1 - alpha) * outer
        lam_est[t - 1] = gather_global(net)[0]
        lam_central[t - 1] = np.linalg.eigvalsh(central)[::-1]
        spectra = node_spectra(net)
        spread[t - 1] = (spectra.max(axis=0) - spectra.min(axis=0)).max()
    ref = lam_true[None, :]
    if scenario.mode == "window":
        # the window recurrence is an unnormalized sum of min(t, beta) terms
        ref = ref * np.minimum(np.arange(1, T + 1), scenario.beta)[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        vs_central = relative_error(lam_est, lam_central)
    return RelativeErrorReport(
        lam_est=lam_est,
        lam_central=lam_central,
        lam_true=lam_true,
        eta=relative_error(lam_est, ref),
        eta_tilde=relative_error(lam_central, ref),
        eta_vs_central=vs_central,
        disagreement=spread,
    )

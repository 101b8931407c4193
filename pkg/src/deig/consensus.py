"""Network-wide summation backends.

Every backend takes one scalar per node (or one column per parallel instance,
shape ``(N, m)``) and returns, at every node, an estimate of the network sum.
Averaging protocols compute the mean and scale it by ``N`` on return.

Backends:

* push-sum over a column-stochastic share matrix,
* average consensus with a constant step size,
* finite-time average consensus driven by the distinct Laplacian eigenvalues,
* FIR graph filtering with a Laplacian or normalized-adjacency shift,
* an exact backend (direct sum) for isolating numerical error from consensus error.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from deig.errors import (
    Disconnected,
    IllConditionedFit,
    IsolatedNode,
    StepSizeTooLarge,
    ValidationError,
    ZeroWeight,
)

FIT_CONDITION_LIMIT = 1e14
DISTINCT_REL_GAP = 1e-6


class Protocol(Enum):
    PS = "ps"
    AC = "ac"
    FTAC = "ftac"
    FILTER = "filter"
    EXACT = "exact"

    @classmethod
    def parse(cls, text):
        try:
            return cls(str(text).lower())
        except ValueError:
            raise ValidationError(f"unknown protocol {text!r}", key="protocol") from None


class Shift(Enum):
    LAPLACIAN = "laplacian"
    NORMALIZED_ADJACENCY = "normalized_adjacency"


@dataclass(frozen=True)
class FilterDesign:
    """Polynomial graph filter ``sum_m h_m S^m``."""

    coefficients: tuple
    shift: Shift = Shift.LAPLACIAN

    def __post_init__(self):
        object.__setattr__(self, "coefficients", tuple(float(h) for h in self.coefficients))

    @property
    def order(self):
        return len(self.coefficients) - 1

    def response(self, lam):
        """Frequency response at ``lam`` (scalar or array)."""
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        for h in reversed(self.coefficients):
            out = out * lam + h
        return out


@dataclass(frozen=True)
class ConsensusConfig:
    protocol: Protocol = Protocol.PS
    gamma_max: int = 100
    epsilon: float | None = None  # AC step size; None selects 1/d_max
    distinct_eigenvalues: tuple | None = None  # ftAC
    filter: FilterDesign | None = None

    def __post_init__(self):
        if self.gamma_max < 0:
            raise ValidationError("must be >= 0", key="gamma")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValidationError("must be positive", key="epsilon")
        if self.protocol is Protocol.FTAC:
            if not self.distinct_eigenvalues:
                raise ValidationError("ftAC needs the distinct nonzero Laplacian eigenvalues", key="distinct_eigenvalues")
            ev = np.asarray(self.distinct_eigenvalues, dtype=float)
            if np.any(ev == 0) or len(np.unique(ev)) != ev.size:
                raise ValidationError("eigenvalues must be nonzero and distinct", key="distinct_eigenvalues")
        if self.protocol is Protocol.FILTER and self.filter is None:
            raise ValidationError("filter protocol needs a FilterDesign", key="filter")

    @property
    def rounds_per_instance(self):
        """Consensus rounds charged per scalar instance (push-sum counts double)."""
        if self.protocol is Protocol.PS:
            return 2
        return 1

    @property
    def iterations(self):
        if self.protocol in (Protocol.PS, Protocol.AC):
            return self.gamma_max
        if self.protocol is Protocol.FTAC:
            return len(self.distinct_eigenvalues)
        if self.protocol is Protocol.FILTER:
            return self.filter.order
        return 0


@dataclass
class ConsensusOutcome:
    """Per-node estimates plus the communication the run consumed."""

    estimates: np.ndarray
    iterations: int
    scalar_messages: int
    peak_magnitude: list = field(default_factory=list)


def _as_columns(values):
    arr = np.asarray(values, dtype=float)
    squeeze = arr.ndim == 1
    return (arr[:, None] if squeeze else arr), squeeze


def _finish(est, squeeze):
    return est[:, 0] if squeeze else est


def _require_connected(g):
    if not g.is_connected():
        raise Disconnected("consensus backends need a connected graph")


def push_sum_matrix(g):
    """Column-stochastic share matrix with ``p_ji = 1/d_i`` for each neighbor ``j``."""
    a = g.adjacency()
    deg = a.sum(axis=0)
    return a / deg[None, :]


def push_sum(g, values, gamma):
    """Push-sum gossip for ``gamma`` iterations; returns ``N * s_i / w_i`` per node."""
    _require_connected(g)
    s, squeeze = _as_columns(values)
    n = g.n_nodes
    p = push_sum_matrix(g)
    w = np.ones((n, 1))
    for _ in range(gamma):
        s = p @ s
        w = p @ w
    if np.any(w == 0):
        raise ZeroWeight("a push-sum weight vanished")
    est = n * s / w
    msgs = 2 * 2 * g.n_edges * gamma * s.shape[1]
    return ConsensusOutcome(_finish(est, squeeze), gamma, msgs)


def max_degree_step(g):
    return 1.0 / g.degrees().max()


def average_consensus(g, values, gamma, epsilon=None):
    """Average consensus ``s <- (I - eps L) s``; returns ``N * s_i`` per node."""
    _require_connected(g)
    s, squeeze = _as_columns(values)
    lap = g.laplacian()
    eps = max_degree_step(g) if epsilon is None else float(epsilon)
    lam_max = np.linalg.eigvalsh(lap)[-1]
    if not 0 < eps < 2.0 / lam_max:
        raise StepSizeTooLarge(f"epsilon={eps} outside (0, 2/lambda_max={2.0 / lam_max})")
    w = np.eye(g.n_nodes) - eps * lap
    for _ in range(gamma):
        s = w @ s
    msgs = 2 * g.n_edges * gamma * s.shape[1]
    return ConsensusOutcome(_finish(g.n_nodes * s, squeeze), gamma, msgs)


def distinct_nonzero(values, rel_gap=DISTINCT_REL_GAP, zero_tol=None):
    """Distinct nonzero entries of a (tracked) Laplacian spectrum, descending.

    Entries below ``zero_tol`` (default ``rel_gap * max|values|``) count as the
    zero eigenvalue; entries closer than ``rel_gap`` relative are merged.
    """
    vals = np.sort(np.asarray(values, dtype=float))[::-1]
    if vals.size == 0:
        return ()
    scale = np.abs(vals).max()
    tol0 = rel_gap * scale if zero_tol is None else zero_tol
    out = []
    for v in vals:
        if abs(v) <= tol0:
            continue
        if out and abs(out[-1] - v) <= rel_gap * max(abs(out[-1]), abs(v)):
            continue
        out.append(float(v))
    return tuple(out)


def ft_average_consensus(g, values, distinct_eigenvalues):
    """Finite-time average consensus; one iteration per supplied eigenvalue.

    The step sizes ``1/lambda`` are applied in descending eigenvalue order.
    """
    _require_connected(g)
    s, squeeze = _as_columns(values)
    lap = g.laplacian()
    eig = sorted((float(v) for v in distinct_eigenvalues), reverse=True)
    for lam in eig:
        s = s - (lap @ s) / lam
    msgs = 2 * g.n_edges * len(eig) * s.shape[1]
    return ConsensusOutcome(_finish(g.n_nodes * s, squeeze), len(eig), msgs)


def transform_scale(g):
    """Diagonal of ``V = (||D^{1/2} 1|| / sqrt(N)) D^{-1/2}`` for the normalized shift."""
    deg = g.degrees()
    if np.any(deg == 0):
        raise IsolatedNode("normalized shift needs every node to have a neighbor")
    c = np.sqrt(deg.sum()) / np.sqrt(g.n_nodes)
    return c / np.sqrt(deg)


def shift_matrix(g, shift):
    if shift is Shift.LAPLACIAN:
        return g.laplacian()
    return g.normalized_adjacency()


def apply_graph_filter(g, values, design):
    """``y = sum_m h_m S^m x`` by repeated one-hop shifts.

    Returns the filter output and the peak absolute entry of each intermediate
    signal ``S^m x`` (``m = 0..K``).
    """
    x, squeeze = _as_columns(values)
    s_mat = shift_matrix(g, design.shift)
    coeffs = design.coefficients
    term = x.copy()
    y = coeffs[0] * term
    peaks = [float(np.abs(term).max(initial=0.0))]
    for h in coeffs[1:]:
        term = s_mat @ term
        y = y + h * term
        peaks.append(float(np.abs(term).max(initial=0.0)))
    return _finish(y, squeeze), peaks


def filter_consensus(g, values, design):
    """Sum estimate through a low-pass graph filter.

    For the normalized-adjacency shift the input is pre-scaled by ``V`` and the
    output post-scaled by ``V`` (diagonal, real), which moves the low-frequency
    eigenvector onto the all-ones direction.  Returns ``N * y`` per node.
    """
    _require_connected(g)
    x, squeeze = _as_columns(values)
    if design.shift is Shift.NORMALIZED_ADJACENCY:
        v = transform_scale(g)[:, None]
        y, peaks = apply_graph_filter(g, v * x, design)
        y = v * y
    else:
        y, peaks = apply_graph_filter(g, x, design)
    msgs = 2 * g.n_edges * design.order * x.shape[1]
    return ConsensusOutcome(_finish(g.n_nodes * y, squeeze), design.order, msgs, peaks)


def fit_filter_coefficients(frequencies, desired, K, shift=Shift.LAPLACIAN):
    """Polynomial coefficients with response ``desired`` at ``frequencies``.

    With ``K + 1 >= len(frequencies)`` the response interpolates (minimum-norm
    solution if underdetermined); otherwise it is the least-squares fit.  The
    fit runs in the scaled variable ``lam / max|lam|``; the conditioning check
    uses the column-equilibrated Vandermonde matrix of that variable.
    """
    freqs = np.asarray(frequencies, dtype=float)
    want = np.asarray(desired, dtype=float)
    if freqs.size == 0:
        raise ValueError("need at least one frequency")
    if freqs.shape != want.shape:
        raise ValueError("frequencies and desired responses differ in length")
    if len(np.unique(freqs)) != freqs.size:
        raise ValueError("frequencies must be distinct")
    if K < 0:
        raise ValueError("filter order must be >= 0")
    c = np.abs(freqs).max()
    c = 1.0 if c == 0 else c
    vander = np.vander(freqs / c, K + 1, increasing=True)
    col_norm = np.linalg.norm(vander, axis=0)
    col_norm[col_norm == 0] = 1.0
    scaled = vander / col_norm
    cond = np.linalg.cond(scaled)
    if not np.isfinite(cond) or cond > FIT_CONDITION_LIMIT:
        raise IllConditionedFit(f"Vandermonde condition {cond:.3g} exceeds {FIT_CONDITION_LIMIT:g}")
    g_scaled, *_ = np.linalg.lstsq(scaled, want, rcond=None)
    g_coef = g_scaled / col_norm
    h = g_coef / c ** np.arange(K + 1)
    return FilterDesign(tuple(h), shift)


def exact_sum(values):
    """Direct network sum broadcast to every node (reference backend)."""
    x, squeeze = _as_columns(values)
    est = np.broadcast_to(x.sum(axis=0, keepdims=True), x.shape).copy()
    return ConsensusOutcome(_finish(est, squeeze), 1, 0)


def _run_real(g, values, config):
    proto = config.protocol
    if proto is Protocol.EXACT:
        return exact_sum(values)
    if proto is Protocol.PS:
        return push_sum(g, values, config.gamma_max)
    if proto is Protocol.AC:
        return average_consensus(g, values, config.gamma_max, config.epsilon)
    if proto is Protocol.FTAC:
        return ft_average_consensus(g, values, config.distinct_eigenvalues)
    return filter_consensus(g, values, config.filter)


def nc_weighted_sum(g, summands, config, metrics=None):
    """Network sum of one summand per node, at every node.

    ``summands`` has shape ``(N,)`` or ``(N, m)`` for ``m`` parallel instances;
    complex summands run their real and imaginary parts as paired instances.
    If ``metrics`` is given its counters are advanced: consensus rounds by
    ``rounds_per_instance`` for every instance, scalar messages by the traffic,
    and wall rounds by the iteration count of the batch.
    """
    arr = np.asarray(summands)
    if arr.shape[0] != g.n_nodes:
        raise ValueError("one summand per node required")
    n_inst = 1 if arr.ndim == 1 else arr.shape[1]
    if np.iscomplexobj(arr):
        both = np.concatenate([_as_columns(arr.real)[0], _as_columns(arr.imag)[0]], axis=1)
        out = _run_real(g, both, config)
        est = out.estimates[:, :n_inst] + 1j * out.estimates[:, n_inst:]
        est = est[:, 0] if arr.ndim == 1 else est
        out = ConsensusOutcome(est, out.iterations, out.scalar_messages, out.peak_magnitude)
    else:
        out = _run_real(g, arr.astype(float), config)
    if metrics is not None:
        metrics.consensus_rounds += config.rounds_per_instance * n_inst
        metrics.consensus_instances += n_inst
        metrics.scalar_messages += out.scalar_messages
        metrics.wall_rounds += out.iterations
    return out

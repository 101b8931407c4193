"""FIR graph-filter designs for network averaging.

Each design is a polynomial ``h(S) = sum_m h_m S^m`` in a graph shift ``S``
whose response should be 1 at the frequency of the constant (or degree-scaled
constant) eigenvector and 0 at every other frequency:

* ``GDnA``: normalized adjacency shift, fitted at its actual eigenvalues; the
  input is pre-scaled and the output post-scaled by ``V`` so that the
  all-ones direction is the passband;
* ``GDL``: Laplacian shift, fitted at the actual Laplacian eigenvalues;
* ``GIDN``: Laplacian shift, fitted on a uniform grid over ``[0, N]``;
* ``GIDM``: Laplacian shift, fitted on a uniform grid over ``[0, lambda_max]``.

The first two are graph dependent; the last two only use the network size or
the largest Laplacian eigenvalue.
"""

import csv
from dataclasses import dataclass

import numpy as np

from deig.consensus import Shift, fit_filter_coefficients, shift_matrix, transform_scale
from deig.netsim import rng_stream

DESIGNS = ("GDnA", "GDL", "GIDN", "GIDM")
FILTER_COLUMNS = ("design", "m", "eta", "peak")
DISTINCT_TOL = 1e-8
GRID_FACTOR = 20  # grid points per coefficient for graph-independent fits


@dataclass
class FilterRun:
    """Averaging error and intermediate-signal peak after each filter tap.

    ``eta[m]`` is the relative error of the partial output ``sum_{k<=m} h_k
    S^k x``; ``peaks[m]`` is ``max |S^m x|`` over the nodes.
    """

    name: str
    coefficients: tuple
    eta: np.ndarray
    peaks: np.ndarray

    @property
    def final_error(self):
        return float(self.eta[-1])

    @property
    def peak_magnitude(self):
        return float(self.peaks.max())


def distinct_frequencies(values, tol=DISTINCT_TOL):
    """Sorted distinct values; entries closer than ``tol * max(1, |v|)`` merge."""
    vals = np.sort(np.asarray(values, dtype=float))
    keep = [vals[0]]
    for v in vals[1:]:
        if v - keep[-1] > tol * max(1.0, abs(v)):
            keep.append(v)
    return np.array(keep)


def averaging_signal(n, seed):
    """Gaussian graph signal with mean 1 and unit variance."""
    return 1.0 + rng_stream(seed, "filter-signal").standard_normal(n)


def design_filter(name, graph, K, laplacian_eigs=None, adjacency_eigs=None, grid_points=None):
    """Coefficients of design ``name`` of order ``K``.

    ``laplacian_eigs`` and ``adjacency_eigs`` are the learned frequencies of
    the Laplacian and of the normalized adjacency; they default to the exact
    spectra.  ``grid_points`` sets the grid size of the graph-independent
    designs (default ``GRID_FACTOR * (K + 1)``, a least-squares fit over the
    whole interval).
    """
    if name not in DESIGNS:
        raise ValueError(f"unknown filter design {name!r}")
    if laplacian_eigs is None:
        laplacian_eigs = np.linalg.eigvalsh(graph.laplacian())
    if name == "GDnA":
        if adjacency_eigs is None:
            adjacency_eigs = np.linalg.eigvalsh(graph.normalized_adjacency())
        freqs = distinct_frequencies(adjacency_eigs)
        passband = np.argmax(freqs)
        want = np.zeros(freqs.size)
        want[passband] = 1.0
        return fit_filter_coefficients(freqs, want, K, Shift.NORMALIZED_ADJACENCY)
    if name == "GDL":
        freqs = distinct_frequencies(laplacian_eigs)
    else:
        top = graph.n_nodes if name == "GIDN" else float(np.max(laplacian_eigs))
        freqs = np.linspace(0.0, top, grid_points or GRID_FACTOR * (K + 1))
    want = np.zeros(freqs.size)
    want[np.argmin(np.abs(freqs))] = 1.0
    return fit_filter_coefficients(freqs, want, K, Shift.LAPLACIAN)


def run_filter(graph, x, design, name=""):
    """Apply ``design`` tap by tap and record the averaging error after each tap."""
    x = np.asarray(x, dtype=float)
    target = np.full_like(x, x.mean())
    s_mat = shift_matrix(graph, design.shift)
    if design.shift is Shift.NORMALIZED_ADJACENCY:
        v = transform_scale(graph)
    else:
        v = np.ones_like(x)
    term = v * x
    partial = np.zeros_like(x)
    eta, peaks = [], []
    for m, h in enumerate(design.coefficients):
        if m:
            term = s_mat @ term
        partial = partial + h * term
        y = v * partial
        eta.append(np.sum((y - target) ** 2) / np.sum(target**2))
        peaks.append(np.abs(term).max())
    return FilterRun(name, design.coefficients, np.array(eta), np.array(peaks))


def run_filter_design(graph, K=12, x=None, seed=0, laplacian_eigs=None, adjacency_eigs=None,
                      designs=DESIGNS, grid_points=None):
    """All requested designs on one averaging task; returns ``{name: FilterRun}``."""
    if x is None:
        x = averaging_signal(graph.n_nodes, seed)
    out = {}
    for name in designs:
        design = design_filter(name, graph, K, laplacian_eigs, adjacency_eigs, grid_points)
        out[name] = run_filter(graph, x, design, name)
    return out


def filter_rows(runs):
    return [{"design": name, "m": m, "eta": float(e), "peak": float(p)}
            for name, run in runs.items() for m, (e, p) in enumerate(zip(run.eta, run.peaks))]


def write_filter_csv(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=FILTER_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

"""Deflation of raw rank-one problems and the full eigen-update built on it.

A raw problem ``diag(d) + rho z z^H`` may have repeated entries in ``d`` and
zero entries in ``z``.  Zero weights leave their eigenpair ``(d_i, e_i)``
untouched.  A group of equal ``d`` entries is rotated by a unitary
Householder matrix ``H`` with ``H z_g = ||z_g|| e_1`` so that only one member
keeps a weight; the rest become zero-weight pass-throughs.
"""

from dataclasses import dataclass, field

import numpy as np

from deig.linalg.secular import DEFAULT_XI, MAX_ITER, RankOneUpdate, solve_all

EPS_DEFLATION = 1e-10


@dataclass
class Reflector:
    """Unitary ``H`` acting on ``positions`` (indices in sorted order)."""

    positions: np.ndarray
    v: np.ndarray
    beta: complex  # H = I - beta v v^H / ||v||^2

    def matrix(self):
        m = self.v.size
        vv = np.outer(self.v, np.conj(self.v)) / np.vdot(self.v, self.v).real
        h = np.eye(m, dtype=np.result_type(self.v, self.beta)) - self.beta * vv
        return h if np.iscomplexobj(self.v) else h.real


@dataclass
class DeflationRecord:
    order: np.ndarray  # sorted position -> original index
    kept: np.ndarray  # sorted positions of the reduced problem
    passthrough: list = field(default_factory=list)  # (sorted position, eigenvalue)
    reflectors: list = field(default_factory=list)

    @property
    def kept_indices(self):
        return self.order[self.kept]

    @property
    def passthrough_indices(self):
        return self.order[[p for p, _ in self.passthrough]] if self.passthrough else np.array([], int)


def householder_to_e1(w):
    """Reflector with ``H w = ||w|| e_1`` (real or complex ``w``).

    The complex form ``I - (1 + w^H v / v^H w) v v^H / ||v||^2`` is unitary and
    maps onto a real positive multiple of ``e_1``.  Returns ``None`` when ``w``
    already has that form.
    """
    w = np.asarray(w)
    nrm = np.linalg.norm(w)
    # ||w||^2 - Re(w_0)^2, formed without cancellation
    tail2 = float(np.sum(np.abs(w[1:]) ** 2)) + (float(w[0].imag) ** 2 if np.iscomplexobj(w) else 0.0)
    if tail2 == 0.0 and w[0].real >= 0:
        return None
    v = w.copy()
    re0 = float(np.real(w[0]))
    # first entry w_0 - ||w|| without cancellation when Re(w_0) > 0
    if re0 > 0:
        v0_re = -tail2 / (re0 + nrm)
    else:
        v0_re = re0 - nrm
    v[0] = v0_re + (1j * w[0].imag if np.iscomplexobj(w) else 0.0)
    if np.iscomplexobj(w):
        beta = 1.0 + np.vdot(w, v) / np.vdot(v, w)
    else:
        beta = 2.0
    return v, beta


def deflate(values, update, eps=EPS_DEFLATION):
    """Reduce a raw problem to one with distinct poles and nonzero weights.

    Returns ``(d_reduced, update_reduced, record)``.  ``d_reduced`` is strictly
    descending; the remaining eigenvalues are listed in ``record.passthrough``.
    """
    values = np.asarray(values, dtype=float)
    z = np.asarray(update.z)
    n = values.size
    if z.shape != (n,):
        raise ValueError("dimension mismatch between spectrum and z")
    order = np.argsort(-values, kind="stable")
    d = values[order]
    zz = z[order].copy()
    znorm = np.linalg.norm(zz)
    record = DeflationRecord(order=order, kept=np.array([], dtype=int))

    if znorm == 0.0 or update.rho == 0:
        record.passthrough = [(p, d[p]) for p in range(n)]
        return d[:0], RankOneUpdate(update.rho, zz[:0]), record

    nonzero = np.abs(zz) > eps * znorm
    for p in np.flatnonzero(~nonzero):
        record.passthrough.append((p, d[p]))
    zz[~nonzero] = 0

    live = np.flatnonzero(nonzero)
    groups = []
    for p in live:
        if groups and abs(d[groups[-1][0]] - d[p]) <= eps * max(1.0, abs(d[groups[-1][0]])):
            groups[-1].append(p)
        else:
            groups.append([p])

    kept = []
    for g in groups:
        head = g[0]
        if len(g) > 1:
            pos = np.array(g)
            h = householder_to_e1(zz[pos])
            if h is not None:
                v, beta = h
                record.reflectors.append(Reflector(positions=pos, v=v, beta=beta))
            zz[head] = np.linalg.norm(zz[pos])
            zz[pos[1:]] = 0
            for p in pos[1:]:
                record.passthrough.append((p, d[p]))
        kept.append(head)

    record.kept = np.array(kept, dtype=int)
    record.passthrough.sort()
    return d[record.kept], RankOneUpdate(update.rho, zz[record.kept]), record


def _tie_stable_order(values, eps):
    """Descending order in which near-equal values keep their input order.

    Values within ``eps * max(1, |v|)`` of their neighbor form a cluster; each
    cluster is listed in input order (secular roots, then pass-throughs by
    position) and set to its mean.  Copies of the same problem that differ by
    rounding noise then order their eigenvectors identically, and the next
    update sees exact ties, which deflation resolves by position.
    """
    perm = np.argsort(-values, kind="stable")
    vals = values[perm]
    out = vals.copy()
    start = 0
    n = vals.size
    for i in range(1, n + 1):
        if i == n or vals[i - 1] - vals[i] > eps * max(1.0, abs(vals[i - 1])):
            if i - start > 1:
                perm[start:i] = np.sort(perm[start:i])
                out[start:i] = vals[start:i].mean()
            start = i
    return perm, out


def rank_one_eigenupdate(values, update, xi=DEFAULT_XI, basis=None, eps=EPS_DEFLATION, max_iter=MAX_ITER):
    """Eigen-decompose ``diag(values) + rho z z^H``.

    ``values`` may hold repeats and ``z`` zeros.  Returns ``(new_values, V)``
    with ``new_values`` descending and ``V`` unitary so that
    ``V diag(new_values) V^H`` equals the modified matrix.  If ``basis`` is
    given (rows of an eigenvector matrix whose columns match ``values``), the
    second return value is ``basis @ V`` instead.
    """
    values = np.asarray(values, dtype=float)
    n = values.size
    z = np.asarray(update.z)
    dtype = np.result_type(z.dtype, float)
    d_red, upd_red, rec = deflate(values, update, eps)

    vecs = np.zeros((n, n), dtype=dtype)
    new_vals = np.empty(n)
    col = 0
    if d_red.size:
        lam, w, _ = solve_all(d_red, upd_red.z, upd_red.rho, xi=xi, max_iter=max_iter)
        vecs[np.ix_(rec.kept, np.arange(lam.size))] = w
        new_vals[: lam.size] = lam
        col = lam.size
    for p, val in rec.passthrough:
        vecs[p, col] = 1.0
        new_vals[col] = val
        col += 1

    for r in rec.reflectors:
        h = r.matrix()
        vecs[r.positions, :] = np.conj(h.T) @ vecs[r.positions, :]

    out = np.empty_like(vecs)
    out[rec.order, :] = vecs
    perm, new_vals = _tie_stable_order(new_vals, eps)
    out = out[:, perm]
    if basis is not None:
        out = np.asarray(basis) @ out
    return new_vals, out

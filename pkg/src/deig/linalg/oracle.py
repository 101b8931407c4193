"""Reference eigensolvers used to check the secular path.

Both routines are written from scratch on purpose: they share no code with the
rank-one machinery, so agreement between the two is meaningful evidence.
"""

import numpy as np

from deig.errors import NonConvergence, NotHermitian

HERMITIAN_TOL = 1e-10


def _round_robin(n):
    """Pairings for one parallel Jacobi sweep over ``n`` (even) indices."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        pairs = np.array([(players[i], players[n - 1 - i]) for i in range(n // 2)])
        rounds.append((pairs[:, 0], pairs[:, 1]))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _rotation(a, p, q):
    """Unitary ``G`` (same size as ``a``) zeroing ``a[p, q]`` for disjoint pairs.

    With ``a_pq = |a_pq| e^{i phi}`` each 2x2 block of ``G`` is
    ``[[c, s], [-s e^{-i phi}, c e^{-i phi}]]`` where ``(c, s)`` is the real
    Jacobi rotation of ``[[a_pp, |a_pq|], [|a_pq|, a_qq]]``.
    """
    apq = a[p, q]
    mag = np.abs(apq)
    live = mag > 0
    conj_phase = np.where(live, np.conj(apq) / np.where(live, mag, 1.0), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = (a[q, q].real - a[p, p].real) / (2.0 * mag)
        t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(live, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    g = np.zeros_like(a)
    g[p, p] = c
    g[p, q] = s
    g[q, p] = -s * conj_phase
    g[q, q] = c * conj_phase
    return g


def dense_eig_oracle(matrix, tol=1e-15, max_sweeps=60):
    """Eigen-decompose a Hermitian matrix by cyclic two-sided Jacobi rotations.

    Every sweep visits each off-diagonal pair once, rotating disjoint pairs in
    parallel.  Returns ``(values, vectors)`` with values in descending order.
    """
    a = np.array(matrix)
    a = a.astype(complex if np.iscomplexobj(a) else float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros((0, 0), dtype=a.dtype)
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.conj().T).max() > HERMITIAN_TOL * scale:
        raise NotHermitian("matrix is not Hermitian")
    a = 0.5 * (a + a.conj().T)

    m = n + n % 2  # pad to even size with a decoupled zero index
    if m != n:
        a = np.pad(a, ((0, 1), (0, 1)))
    u = np.eye(m, dtype=a.dtype)
    schedule = _round_robin(m)
    fro = np.linalg.norm(a)

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * fro:
            break
        for p, q in schedule:
            g = _rotation(a, p, q)
            a = g.conj().T @ a @ g
            u = u @ g
    else:
        raise NonConvergence(f"Jacobi sweeps did not converge in {max_sweeps} sweeps")

    vals = np.diag(a).real[:n]
    vecs = u[:n, :n]
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def _hessenberg(a):
    """Reduce to upper Hessenberg form by Householder similarity transforms."""
    h = a.copy()
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1 :, k]
        alpha = np.linalg.norm(x)
        if alpha == 0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1 :, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1 :, :])
        h[:, k + 1 :] -= 2.0 * np.outer(h[:, k + 1 :] @ v, v.conj())
    return h


def small_general_eig(matrix, max_iter=500):
    """Eigenvalues of a small general complex matrix (``n <= 8``).

    Hessenberg reduction followed by single-shift QR with Wilkinson shifts and
    deflation from the bottom.
    """
    a = np.array(matrix, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n > 8:
        raise ValueError("small_general_eig is limited to n <= 8")
    h = _hessenberg(a)
    eig = np.zeros(n, dtype=complex)
    hi = n
    iters = 0
    norm = max(np.abs(h).max(), np.finfo(float).tiny)
    while hi > 0:
        if hi == 1:
            eig[0] = h[0, 0]
            break
        # look for a negligible subdiagonal entry
        small = np.abs(h[hi - 1, hi - 2]) <= np.finfo(float).eps * (
            np.abs(h[hi - 1, hi - 1]) + np.abs(h[hi - 2, hi - 2]) + 1e-300 * norm
        )
        if small:
            eig[hi - 1] = h[hi - 1, hi - 1]
            hi -= 1
            iters = 0
            continue
        iters += 1
        if iters > max_iter:
            raise NonConvergence("QR iteration did not converge")
        sub = h[hi - 2 : hi, hi - 2 : hi]
        tr = sub[0, 0] + sub[1, 1]
        det = sub[0, 0] * sub[1, 1] - sub[0, 1] * sub[1, 0]
        disc = np.sqrt(tr * tr / 4 - det)
        mu1, mu2 = tr / 2 + disc, tr / 2 - disc
        mu = mu1 if abs(mu1 - sub[1, 1]) < abs(mu2 - sub[1, 1]) else mu2
        if iters % 11 == 10:  # exceptional shift against cycling
            mu = mu + abs(h[hi - 1, hi - 2])
        active = h[:hi, :hi] - mu * np.eye(hi)
        q, r = np.linalg.qr(active)
        h[:hi, :hi] = r @ q + mu * np.eye(hi)
        h[:hi, hi:] = q.conj().T @ h[:hi, hi:]
    return eig

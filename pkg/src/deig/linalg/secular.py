"""Root finding for the secular equation of a rank-one modified diagonal matrix.

For ``D = diag(d)`` with ``d`` strictly descending, ``rho != 0`` and ``z`` free
of zero entries, the eigenvalues of ``D + rho * z z^H`` are the zeros of

    f(lam) = 1 + rho * sum_i |z_i|^2 / (d_i - lam)

Each zero is computed by the two-pole rational approximation iteration: the
part of the sum with poles above the bracket and the part with poles below are
each replaced by ``a + b / (pole - lam)`` matching value and slope at the
current iterate, and the resulting quadratic is solved for the next iterate.

Roots are stored as ``(origin, offset)`` pairs, ``lam = d[origin] + offset``,
with ``origin`` the nearer pole.  Differences ``d_i - lam`` are then formed as
``(d_i - d[origin]) - offset`` which keeps full relative accuracy when a root
hugs a pole; the eigenvectors depend on exactly these differences.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from deig.errors import InvalidBracket, NonConvergence

DEFAULT_XI = 1e-12
MAX_ITER = 200
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class RankOneUpdate:
    """The pair ``(rho, z)`` of a modification ``rho * z z^H``."""

    rho: float
    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", np.asarray(self.z))
        if not np.isfinite(self.rho):
            raise ValueError("rho must be finite")

    @property
    def is_complex(self):
        return np.iscomplexobj(self.z)

    def matrix(self):
        return self.rho * np.outer(self.z, np.conj(self.z))


@dataclass(frozen=True)
class SecularSolveResult:
    root: float
    iterations: int
    residual: float
    eigenvector: np.ndarray


@dataclass(frozen=True)
class _Roots:
    """Batch of solved roots in the frame where rho > 0."""

    origin: np.ndarray  # pole index each offset is measured from
    offset: np.ndarray
    iterations: np.ndarray

    def values(self, d):
        return d[self.origin] + self.offset


def secular_function(d, rho, z, lam):
    """Evaluate ``f(lam)`` directly (no origin shift)."""
    zsq = np.abs(np.asarray(z)) ** 2
    return 1.0 + rho * np.sum(zsq / (np.asarray(d, dtype=float) - lam))


def _check_deflated(d, zsq):
    if d.ndim != 1 or d.shape != zsq.shape:
        raise ValueError("d and z must be 1-D and of equal length")
    if not np.all(np.isfinite(d)):
        raise ValueError("non-finite eigenvalue")
    if np.any(np.diff(d) >= 0):
        raise InvalidBracket("eigenvalues must be strictly descending; deflate first")
    if np.any(zsq == 0):
        raise InvalidBracket("zero weight in z; deflate first")


def _solve(d, zsq, rho, ks, xi, max_iter):
    """Solve roots ``ks`` (0-based) of the secular equation, assuming rho > 0.

    Brackets and origins are set up here for all roots at once; the iteration
    itself runs root by root in compiled code.
    """
    ks = np.asarray(ks, dtype=int)
    upper = np.maximum(ks - 1, 0)
    # the top root lies in (d_0, d_0 + rho ||z||^2)
    gap = np.where(ks == 0, rho * zsq.sum(), d[upper] - d[ks])
    half = 0.5 * gap
    # f at the bracket midpoint, measured from pole k so tiny gaps survive
    from_lower = d[None, :] - d[ks][:, None]
    f_mid = 1.0 + rho * np.sum(zsq / (from_lower - half[:, None]), axis=1)

    # f increases across the bracket, so f(mid) >= 0 puts the root in the
    # lower half, next to pole k.  The top root has no pole above it.
    root_low = f_mid >= 0
    near_lower = root_low | (ks == 0)
    origin = np.where(near_lower, ks, upper)
    delta = d[None, :] - d[origin][:, None]  # d_i - d[origin]
    lo = np.where(near_lower, np.where(root_low, 0.0, half), -half)
    hi = np.where(near_lower, np.where(root_low, half, gap), 0.0)

    tau, iterations, converged = _iterate(delta, rho * zsq, ks, lo, hi, float(xi), int(max_iter))
    if not converged.all():
        bad = int(ks[np.flatnonzero(~converged)[0]])
        raise NonConvergence(f"secular root {bad} did not converge in {max_iter} iterations", index=bad)
    return _Roots(origin=origin, offset=tau, iterations=iterations)


@njit(cache=True, error_model="numpy")
def _iterate(delta, rz, ks, lo0, hi0, xi, max_iter):
    """Rational-approximation iteration for each root, one row of ``delta`` per root.

    ``delta[r, i]`` is ``d_i - d[origin_r]`` and the unknown is the offset
    ``t`` from the origin pole, bracketed by ``(lo0[r], hi0[r])``.
    """
    m, n = delta.shape
    tau = np.empty(m)
    iterations = np.zeros(m, dtype=np.int64)
    converged = np.zeros(m, dtype=np.bool_)
    for r in range(m):
        k = ks[r]
        lo = lo0[r]
        hi = hi0[r]
        t = 0.5 * (lo + hi)
        to_upper = delta[r, k - 1] if k > 0 else 0.0
        to_lower = delta[r, k]
        done = False
        for _ in range(max_iter):
            iterations[r] += 1
            psi = 0.0  # poles above the root
            dpsi = 0.0
            phi = 0.0  # poles at or below the root
            dphi = 0.0
            for i in range(n):
                diff = delta[r, i] - t
                w = rz[i] / diff
                if i < k:
                    psi += w
                    dpsi += w / diff
                else:
                    phi += w
                    dphi += w / diff
            f = 1.0 + psi + phi
            if f == 0.0:
                done = True
                break
            if f < 0.0:
                lo = t
            else:
                hi = t

            b = to_lower - t  # distance to the lower pole (negative)
            s = dphi * b * b
            c = 1.0 + phi - s / b
            e1 = np.nan
            e2 = np.nan
            if k > 0:
                a = to_upper - t  # distance to the upper pole
                q = dpsi * a * a
                c += psi - q / a
                # step eta solves c (a-eta)(b-eta) + q (b-eta) + s (a-eta) = 0,
                # i.e. c eta^2 - bb eta + a b f = 0
                bb = c * (a + b) + q + s
                cc = a * b * f
                disc = bb * bb - 4.0 * c * cc
                if disc >= 0.0:
                    sq = np.sqrt(disc)
                    den = bb + sq if bb >= 0.0 else bb - sq
                    e1 = 2.0 * cc / den
                    e2 = den / (2.0 * c)
            else:
                # one pole only: c (b - eta) + s = 0
                e1 = b + s / c

            in1 = lo < t + e1 < hi
            in2 = lo < t + e2 < hi
            if in2 and (not in1 or abs(e2) < abs(e1)):
                eta = e2
            elif in1:
                eta = e1
            else:
                eta = np.nan
            # a step below the tolerance may round onto a bracket end; that is
            # convergence, not a reason to bisect
            if not np.isfinite(eta) and abs(e1) < max(xi, 4.0 * _EPS * abs(t)):
                eta = 0.0
            bisect = not np.isfinite(eta)
            new_t = 0.5 * (lo + hi) if bisect else t + eta
            step = abs(new_t - t)
            scale = max(abs(new_t), abs(lo) + abs(hi))
            done = (step < max(xi, 4.0 * _EPS * abs(new_t)) and not bisect) or (hi - lo <= 4.0 * _EPS * scale)
            t = new_t
            if done:
                break
        tau[r] = t
        converged[r] = done
    return tau, iterations, converged


def _positive_frame(d, z, rho):
    """Map a rho < 0 problem onto rho > 0 by reversing and negating d."""
    if rho > 0:
        return d, z, rho, False
    return -d[::-1], z[::-1], -rho, True


def _differences(d, roots):
    """Matrix ``d_i - lam_k`` (rows i, columns k) accurate near poles."""
    base = d[None, :] - d[roots.origin][:, None]
    return (base - roots.offset[:, None]).T


def _refined_weights(d, z, rho, roots, diffs):
    """Weights reconstructed from the computed roots (Loewner formula).

    Using these instead of ``z`` in the eigenvector formula makes the computed
    vectors exact eigenvectors of a nearby problem, so they stay orthogonal
    even when roots crowd a pole.  Phases are taken from ``z``.
    """
    n = d.size
    # lam_j - d_i = -diffs[i, j]
    num = -diffs
    den = d[None, :] - d[:, None]  # d_j - d_i
    np.fill_diagonal(den, 1.0)
    # pair numerator j with denominator j (j != i); the extra numerator term
    # is the diagonal lam_i - d_i.  Each ratio is O(1) by interlacing.
    ratio = num / den
    np.fill_diagonal(ratio, 1.0)
    mag2 = np.abs(np.diag(num) * np.prod(ratio, axis=1) / rho)
    mag = np.sqrt(mag2)
    if n == 1:
        mag = np.abs(z)
    phase = np.where(np.abs(z) > 0, z / np.abs(z), 1.0)
    return mag * phase


def solve_all(d, z, rho, xi=DEFAULT_XI, max_iter=MAX_ITER, refine=True):
    """All eigenpairs of ``diag(d) + rho z z^H`` for a deflated problem.

    Returns ``(values, vectors, iterations)`` with values descending and unit
    columns in ``vectors``.
    """
    d = np.asarray(d, dtype=float)
    z = np.asarray(z)
    zsq = np.abs(z) ** 2
    _check_deflated(d, zsq)
    if rho == 0:
        raise ValueError("rho must be nonzero")
    dd, zz, rr, flipped = _positive_frame(d, z, rho)
    roots = _solve(dd, np.abs(zz) ** 2, rr, np.arange(dd.size), xi, max_iter)
    diffs = _differences(dd, roots)
    w = _refined_weights(dd, zz, rr, roots, diffs) if refine else zz
    vecs = w[:, None] / diffs
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    vals = roots.values(dd)
    its = roots.iterations
    if flipped:
        vals = -vals[::-1]
        vecs = vecs[::-1, ::-1]
        its = its[::-1]
    return vals, vecs, its


def secular_root(d, update, k, xi=DEFAULT_XI, max_iter=MAX_ITER):
    """Solve for the ``k``-th largest root (0-based) of one secular equation.

    ``d`` must be strictly descending and ``update.z`` free of zeros; run
    :func:`deig.linalg.deflation.deflate` first on raw problems.
    """
    d = np.asarray(d, dtype=float)
    z = np.asarray(update.z)
    rho = update.rho
    zsq = np.abs(z) ** 2
    _check_deflated(d, zsq)
    n = d.size
    if not 0 <= k < n:
        raise IndexError(f"k={k} outside 0..{n - 1}")
    if rho == 0:
        raise ValueError("rho must be nonzero")
    if xi <= 0:
        raise ValueError("xi must be positive")
    dd, zz, rr, flipped = _positive_frame(d, z, rho)
    kk = n - 1 - k if flipped else k
    roots = _solve(dd, np.abs(zz) ** 2, rr, [kk], xi, max_iter)
    diff = (dd - dd[roots.origin[0]]) - roots.offset[0]
    v = zz / diff
    v = v / np.linalg.norm(v)
    root = float(roots.values(dd)[0])
    if flipped:
        root = -root
        v = v[::-1]
    residual = abs(secular_function(d, rho, z, root))
    return SecularSolveResult(
        root=root, iterations=int(roots.iterations[0]), residual=residual, eigenvector=v
    )

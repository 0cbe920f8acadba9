"""Small dense kernels for m x n multiplier matrices with m << n.

Everything here is sized for a handful of conserved quantities: the Gram
matrix ``B = A A^T`` is m x m and the SVD is a one-sided Jacobi sweep over
the m rows of ``A``.  The ``_``-prefixed functions are the compiled kernels;
they report failure through an integer status (see :mod:`conservo.errors`)
because raising inside nopython code cannot be caught by callers.
"""

from typing import NamedTuple

import numpy as np

from ._jit import njit
from .errors import NO_CONVERGENCE, OK, SINGULAR, InvalidParams, raise_for_status

PIVOT_RTOL = 1e-14
SVD_RTOL = 1e-14
JACOBI_TOL = 1e-15
MAX_SWEEPS = 60


class SvdFactors(NamedTuple):
    """Thin SVD ``A = U diag(sigma) V^T`` of an m x n matrix, m <= n."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


# ---------------------------------------------------------------- kernels


@njit
def _max_abs(a):
    out = 0.0
    for v in a.ravel():
        if abs(v) > out:
            out = abs(v)
    return out


@njit
def _solve_sym_multi(b, rhs):
    """Solve ``b @ g = rhs`` for a symmetric ``b`` and an (m, k) ``rhs``.

    Cholesky first; a nonpositive pivot switches to LU with partial pivoting.
    """
    m = b.shape[0]
    k = rhs.shape[1]
    thr = PIVOT_RTOL * _max_abs(b)
    g = np.zeros((m, k))
    if thr == 0.0:
        return g, SINGULAR

    chol = np.zeros((m, m))
    ok = True
    for j in range(m):
        d = b[j, j]
        for p in range(j):
            d -= chol[j, p] * chol[j, p]
        if d <= 0.0:
            ok = False
            break
        if d < thr:
            return g, SINGULAR
        ljj = np.sqrt(d)
        chol[j, j] = ljj
        for i in range(j + 1, m):
            s = b[i, j]
            for p in range(j):
                s -= chol[i, p] * chol[j, p]
            chol[i, j] = s / ljj

    if ok:
        for c in range(k):
            y = np.empty(m)
            for i in range(m):
                s = rhs[i, c]
                for p in range(i):
                    s -= chol[i, p] * y[p]
                y[i] = s / chol[i, i]
            for i in range(m - 1, -1, -1):
                s = y[i]
                for p in range(i + 1, m):
                    s -= chol[p, i] * g[p, c]
                g[i, c] = s / chol[i, i]
        return g, OK

    # LU with partial pivoting
    lu = b.copy()
    work = rhs.copy()
    for j in range(m):
        piv = j
        best = abs(lu[j, j])
        for i in range(j + 1, m):
            if abs(lu[i, j]) > best:
                best = abs(lu[i, j])
                piv = i
        if best < thr:
            return g, SINGULAR
        if piv != j:
            for c in range(m):
                tmp = lu[j, c]
                lu[j, c] = lu[piv, c]
                lu[piv, c] = tmp
            for c in range(k):
                tmp = work[j, c]
                work[j, c] = work[piv, c]
                work[piv, c] = tmp
        for i in range(j + 1, m):
            fac = lu[i, j] / lu[j, j]
            lu[i, j] = fac
            for c in range(j + 1, m):
                lu[i, c] -= fac * lu[j, c]
            for c in range(k):
                work[i, c] -= fac * work[j, c]
    for c in range(k):
        for i in range(m - 1, -1, -1):
            s = work[i, c]
            for p in range(i + 1, m):
                s -= lu[i, p] * g[p, c]
            g[i, c] = s / lu[i, i]
    return g, OK


@njit
def _solve_sym(b, r):
    g, status = _solve_sym_multi(b, r.reshape((r.shape[0], 1)))
    return g[:, 0].copy(), status


@njit
def _complete_orthonormal(v, filled):
    """Fill columns of ``v`` not flagged in ``filled`` with unit vectors
    orthogonal to all others (two passes of Gram-Schmidt on e_k)."""
    n, m = v.shape
    cand = 0
    for col in range(m):
        if filled[col]:
            continue
        while cand < n:
            e = np.zeros(n)
            e[cand] = 1.0
            cand += 1
            for _ in range(2):
                for other in range(m):
                    if filled[other]:
                        e -= np.dot(v[:, other], e) * v[:, other]
            nrm = np.sqrt(np.dot(e, e))
            if nrm > 1e-8:
                v[:, col] = e / nrm
                filled[col] = True
                break


@njit
def _svd_thin(a):
    """One-sided Jacobi on the rows of an m x n matrix (m <= n)."""
    m, n = a.shape
    w = a.copy()
    u = np.eye(m)
    status = NO_CONVERGENCE
    for _sweep in range(MAX_SWEEPS):
        rotated = False
        for p in range(m - 1):
            for q in range(p + 1, m):
                alpha = np.dot(w[p], w[p])
                beta = np.dot(w[q], w[q])
                gamma = np.dot(w[p], w[q])
                if gamma == 0.0 or abs(gamma) <= JACOBI_TOL * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = 1.0 / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                wp = w[p].copy()
                w[p] = c * wp - s * w[q]
                w[q] = s * wp + c * w[q]
                up = u[:, p].copy()
                u[:, p] = c * up - s * u[:, q]
                u[:, q] = s * up + c * u[:, q]
        if not rotated:
            status = OK
            break

    norms = np.empty(m)
    for i in range(m):
        norms[i] = np.sqrt(np.dot(w[i], w[i]))
    order = np.argsort(-norms)
    sigma = norms[order]
    u_out = np.empty((m, m))
    v = np.zeros((n, m))
    filled = np.zeros(m, dtype=np.bool_)
    for k in range(m):
        i = order[k]
        u_out[:, k] = u[:, i]
        if sigma[k] > 0.0:
            v[:, k] = w[i] / sigma[k]
            filled[k] = True
    if not filled.all():
        _complete_orthonormal(v, filled)
    return u_out, sigma, v, status


@njit
def _cond_from_sigma(sigma):
    smin = sigma[-1]
    if smin < 1e-300:
        return np.inf
    return sigma[0] / smin


@njit
def _cond_2(a):
    if a.shape[0] > a.shape[1]:
        a = a.T.copy()
    _, sigma, _, status = _svd_thin(a)
    return _cond_from_sigma(sigma), status


@njit
def _pinv_normal(a):
    """Explicit right pseudoinverse ``A^T (A A^T)^{-1}`` plus ``B = A A^T``."""
    m = a.shape[0]
    b = a @ a.T
    binv, status = _solve_sym_multi(b, np.eye(m))
    return a.T @ binv, b, status


@njit
def _apply_pinv_svd(u, sigma, v, r):
    a_coef = u.T @ r
    b_coef = a_coef / sigma
    return v @ b_coef


@njit
def _svd_rank_ok(sigma):
    return sigma[-1] > SVD_RTOL * sigma[0]


# ------------------------------------------------------------ public API


def _as_matrix(a, name="a"):
    arr = np.atleast_2d(np.asarray(a, dtype=float))
    if arr.ndim != 2:
        raise InvalidParams(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParams(f"{name} has non-finite entries")
    return np.ascontiguousarray(arr)


def solve_sym(b_matrix, rhs):
    """Solve ``B g = r`` for a symmetric positive (semi)definite ``B``.

    Raises
    ------
    SingularMatrix
        If the smallest pivot falls below ``1e-14 * max|B|``.
    """
    b = _as_matrix(b_matrix, "b_matrix")
    r = np.asarray(rhs, dtype=float).reshape(-1)
    if b.shape[0] != b.shape[1] or b.shape[0] != r.shape[0]:
        raise InvalidParams(f"shape mismatch: B {b.shape}, r {r.shape}")
    scale = max(1.0, float(np.max(np.abs(b))))
    if np.max(np.abs(b - b.T)) > 1e-12 * scale:
        raise InvalidParams("b_matrix is not symmetric")
    g, status = _solve_sym(b, np.ascontiguousarray(r))
    raise_for_status(status, "solve_sym")
    return g


def svd_thin(a):
    """Thin SVD of an m x n matrix with m <= n by one-sided Jacobi."""
    arr = _as_matrix(a)
    if arr.shape[0] > arr.shape[1]:
        raise InvalidParams(f"svd_thin needs rows <= cols, got {arr.shape}")
    u, sigma, v, status = _svd_thin(arr)
    raise_for_status(status, "svd_thin")
    return SvdFactors(u, sigma, v)


def apply_pinv(a, v, backend="normal_eq"):
    """Return ``A^+ v`` for a full-row-rank ``A``.

    ``backend='normal_eq'`` solves with ``A A^T``; ``backend='svd'`` uses the
    Jacobi factors.
    """
    arr = _as_matrix(a)
    vec = np.ascontiguousarray(np.asarray(v, dtype=float).reshape(-1))
    if vec.shape[0] != arr.shape[0]:
        raise InvalidParams(f"v has length {vec.shape[0]}, expected {arr.shape[0]}")
    if backend == "normal_eq":
        g, status = _solve_sym(arr @ arr.T, vec)
        raise_for_status(status, "apply_pinv(normal_eq)")
        return arr.T @ g
    if backend == "svd":
        f = svd_thin(arr)
        if not _svd_rank_ok(f.sigma):
            raise_for_status(SINGULAR, "apply_pinv(svd): rank deficient")
        return _apply_pinv_svd(f.u, f.sigma, f.v, vec)
    raise InvalidParams(f"unknown backend {backend!r}; use 'normal_eq' or 'svd'")


def cond_2(a):
    """2-norm condition number; ``inf`` when the smallest singular value
    underflows below 1e-300."""
    arr = _as_matrix(a)
    kappa, status = _cond_2(arr)
    raise_for_status(status, "cond_2")
    return float(kappa)


def kernel_basis(a):
    """Orthonormal basis of ker(A) as the columns of an n x (n - rank) array."""
    arr = _as_matrix(a)
    m, n = arr.shape
    f = svd_thin(arr)
    rank = int(np.sum(f.sigma > SVD_RTOL * max(f.sigma[0], 1e-300)))
    full = np.zeros((n, n))
    full[:, :rank] = f.v[:, :rank]
    filled = np.zeros(n, dtype=bool)
    filled[:rank] = True
    _complete_orthonormal(full, filled)
    return full[:, rank:]

"""Symmetric tridiagonal eigensolver: Sturm bisection and inverse iteration.

The matrix has diagonal ``d`` (length ``n``) and off-diagonal ``e``
(length ``n - 1``).  Eigenvalues are located one index at a time by
bisection on the Sturm count, and eigenvectors are obtained by inverse
iteration with a partially pivoted tridiagonal LU factorization.  Kernels
are compiled with numba; results are deterministic.
"""

from __future__ import annotations

import numba
import numpy as np

__all__ = ["sturm_count", "eigvals_below", "eigvals_index", "inverse_iteration", "eigh_tridiag"]

_TINY = 1e-300


@numba.njit(cache=True)
def _count(d, e2, x):
    # number of eigenvalues strictly below x
    n = d.shape[0]
    cnt = 0
    q = d[0] - x
    if q < 0.0:
        cnt += 1
    for i in range(1, n):
        if q == 0.0:
            q = _TINY
        q = d[i] - x - e2[i - 1] / q
        if q < 0.0:
            cnt += 1
    return cnt


@numba.njit(cache=True)
def _bisect(d, e2, i0, i1, lo, hi):
    out = np.empty(i1 - i0)
    for j in range(i0, i1):
        a = lo
        b = hi
        for _ in range(200):
            m = 0.5 * (a + b)
            if m <= a or m >= b:
                break
            if b - a <= 4e-16 * max(abs(a), abs(b)) + 1e-300:
                break
            if _count(d, e2, m) > j:
                b = m
            else:
                a = m
        out[j - i0] = 0.5 * (a + b)
        # later indices are at least this large
        lo = a
    return out


@numba.njit(cache=True)
def _solve_shifted(d, e, lam, rhs):
    # (T - lam) x = rhs by Gaussian elimination with partial pivoting
    n = d.shape[0]
    a = d - lam  # diagonal
    bu = np.zeros(n)  # first super-diagonal
    bu2 = np.zeros(n)  # second super-diagonal created by pivoting
    bl = np.zeros(n)  # sub-diagonal
    for i in range(n - 1):
        bu[i] = e[i]
        bl[i] = e[i]
    x = rhs.copy()
    for i in range(n - 1):
        if abs(bl[i]) > abs(a[i]):
            # swap rows i and i+1
            t = a[i]
            a[i] = bl[i]
            bl[i] = t
            t = bu[i]
            bu[i] = a[i + 1]
            a[i + 1] = t
            t = bu2[i]
            bu2[i] = bu[i + 1] if i + 1 < n - 1 else 0.0
            if i + 1 < n - 1:
                bu[i + 1] = t
            t = x[i]
            x[i] = x[i + 1]
            x[i + 1] = t
        piv = a[i]
        if piv == 0.0:
            piv = 1e-300
            a[i] = piv
        m = bl[i] / piv
        a[i + 1] -= m * bu[i]
        if i + 1 < n - 1:
            bu[i + 1] -= m * bu2[i]
        x[i + 1] -= m * x[i]
    if a[n - 1] == 0.0:
        a[n - 1] = 1e-300
    x[n - 1] /= a[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - bu[n - 2] * x[n - 1]) / a[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - bu[i] * x[i + 1] - bu2[i] * x[i + 2]) / a[i]
    return x


@numba.njit(cache=True)
def _inverse_iteration(d, e, lams, n_iter):
    n = d.shape[0]
    m = lams.shape[0]
    vecs = np.empty((m, n))
    for j in range(m):
        v = np.empty(n)
        for i in range(n):
            # deterministic start vector with no special symmetry
            v[i] = 1.0 + 0.5 * np.sin(0.7 * i + 1.3 * j)
        v /= np.sqrt(np.sum(v * v))
        for _ in range(n_iter):
            v = _solve_shifted(d, e, lams[j], v)
            v /= np.sqrt(np.sum(v * v))
        # fix the sign: first significant entry positive
        vmax = np.max(np.abs(v))
        for i in range(n):
            if abs(v[i]) > 1e-3 * vmax:
                if v[i] < 0:
                    v = -v
                break
        vecs[j] = v
    return vecs


def _prep(d, e):
    d = np.ascontiguousarray(d, dtype=float)
    e = np.ascontiguousarray(e, dtype=float)
    if e.shape[0] != d.shape[0] - 1:
        raise ValueError("off-diagonal must have length n - 1")
    return d, e, e * e


def _gershgorin(d, e):
    ae = np.abs(e)
    r = np.zeros_like(d)
    r[:-1] += ae
    r[1:] += ae
    return float(np.min(d - r)), float(np.max(d + r))


def sturm_count(d, e, x: float) -> int:
    """Number of eigenvalues strictly below ``x``."""
    d, e, e2 = _prep(d, e)
    return int(_count(d, e2, float(x)))


def eigvals_index(d, e, i0: int, i1: int) -> np.ndarray:
    """Eigenvalues with indices ``i0 <= j < i1`` in ascending order."""
    d, e, e2 = _prep(d, e)
    lo, hi = _gershgorin(d, e)
    pad = 1e-12 * max(abs(lo), abs(hi), 1.0)
    return _bisect(d, e2, int(i0), int(i1), lo - pad, hi + pad)


def eigvals_below(d, e, x: float) -> np.ndarray:
    """All eigenvalues strictly below ``x``."""
    return eigvals_index(d, e, 0, sturm_count(d, e, x))


def inverse_iteration(d, e, lams, n_iter: int = 3) -> np.ndarray:
    """Unit eigenvectors for the eigenvalue approximations ``lams`` (rows)."""
    d, e, _ = _prep(d, e)
    return _inverse_iteration(d, e, np.ascontiguousarray(lams, dtype=float), int(n_iter))


def eigh_tridiag(d, e, x_max: float, n_iter: int = 3):
    """Eigenpairs with eigenvalue below ``x_max``; vectors are rows."""
    w = eigvals_below(d, e, x_max)
    return w, inverse_iteration(d, e, w, n_iter)

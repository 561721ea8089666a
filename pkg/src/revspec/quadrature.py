"""Quadrature building blocks.

``tanh_sinh`` handles integrable endpoint singularities and serves as an
independent reference.  ``PeriodicPrimitive`` integrates smooth periodic
integrands spectrally, which is how the Clairaut integrals are evaluated
after the substitution ``sigma = sigma_plus * sin(phi)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import NumericFailure

__all__ = ["tanh_sinh", "gauss_legendre", "offset_nodes", "PeriodicPrimitive"]


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Nodes and weights of the ``n``-point Gauss-Legendre rule on ``[a, b]``."""
    x, w = _gl(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def tanh_sinh(func, a: float, b: float, tol: float = 1e-12, max_level: int = 10, distances: bool = False):
    """Double-exponential quadrature of ``func`` over ``[a, b]``.

    ``func`` must accept arrays.  With ``distances=True`` it is called as
    ``func(x, x - a, b - x)`` where the two distances are computed directly
    from the transformation, so integrands with ``(b - x)**-0.5`` behaviour
    can be evaluated accurately in the far tails.

    Returns
    -------
    value, error_estimate : float, float
    """
    if b == a:
        return 0.0, 0.0
    if b < a:
        v, e = tanh_sinh(func, b, a, tol, max_level, distances)
        return -v, e
    half = 0.5 * (b - a)
    t_max = 6.5 if distances else 3.2

    def level_sum(t):
        u = 0.5 * np.pi * np.sinh(t)
        with np.errstate(over="ignore"):
            comp = 2.0 / (1.0 + np.exp(2.0 * np.abs(u)))  # 1 - tanh|u|
            w = half * 0.5 * np.pi * np.cosh(t) * 4.0 / (np.exp(u) + np.exp(-u)) ** 2
        near = half * comp
        far = 2.0 * half - near
        left = u < 0
        x = np.where(left, a + near, b - near)
        da = np.where(left, near, far)
        db = np.where(left, far, near)
        ok = (da > 0) & (db > 0) & (w > 0)
        if not np.any(ok):
            return 0.0
        if distances:
            vals = func(x[ok], da[ok], db[ok])
        else:
            ok &= (x > a) & (x < b)
            vals = func(x[ok])
        return float(np.sum(w[ok] * vals))

    h = 1.0
    t = np.arange(-t_max, t_max + 0.5 * h, h)
    total = level_sum(t)
    est = h * total
    err = np.inf
    for _ in range(max_level):
        h *= 0.5
        t_new = np.arange(-t_max + h, t_max, 2 * h)
        total += level_sum(t_new)
        new = h * total
        err = abs(new - est)
        est = new
        if err <= tol * max(abs(est), 1e-300):
            return est, err
    return est, err


def offset_nodes(n: int) -> np.ndarray:
    """Uniform nodes ``2 pi (j + 1/2) / n`` on the circle."""
    return 2.0 * np.pi * (np.arange(n) + 0.5) / n


class PeriodicPrimitive:
    """Primitive of a smooth ``2 pi``-periodic function known on ``offset_nodes(n)``.

    ``W(phi) = mean * phi + periodic part`` with ``W(0) = 0``.
    """

    def __init__(self, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        n = values.shape[-1]
        self.n = n
        c = np.fft.rfft(values, axis=-1) / n
        k = np.arange(c.shape[-1])
        c = c * np.exp(-1j * k * np.pi / n)  # undo the half-step node offset
        self.mean = c[..., 0].real
        kk = k[1:]
        if n % 2 == 0:
            kk = kk[:-1]
            c = c[..., :-1]
        self._k = kk
        self._coef = 2.0 * c[..., 1:] / (1j * kk)
        self.tail = float(np.max(np.abs(c[..., -max(1, len(kk) // 8):]))) if len(kk) else 0.0

    @property
    def period_integral(self):
        return 2.0 * np.pi * self.mean

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        e = np.exp(1j * np.multiply.outer(phi, self._k)) - 1.0
        if self._coef.ndim == 1:
            return self.mean * phi + (e @ self._coef).real
        raise NumericFailure("batched primitive evaluation is not supported")

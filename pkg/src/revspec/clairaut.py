"""Clairaut data of geodesics on a simple symmetric surface.

A geodesic with Clairaut integral ``I`` oscillates between the parallels
``sigma = -sigma_plus(I)`` and ``sigma = sigma_plus(I)`` where
``f(sigma_plus) = I``.  Writing ``sigma = sigma_plus * sin(phi)`` gives

    1 - I^2/f^2 = (sigma_plus^2 - sigma^2) * H(sigma)

with ``H`` smooth, even and positive, so the singular integrals for the
oscillation length ``tau``, the azimuthal advance ``Delta theta`` and the
action become integrals of analytic ``2 pi``-periodic functions of ``phi``.
The periodic trapezoidal rule then converges geometrically.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.optimize import brentq

from .errors import InvalidParameter, NumericFailure, UnsupportedSurface
from .quadrature import offset_nodes
from .surface import Profile

__all__ = [
    "ClairautData",
    "TwistReport",
    "ClairautTable",
    "turning_point",
    "orbit_integrals",
    "orbit_integrands",
    "tau",
    "delta_theta",
    "omega",
    "omega_prime",
    "clairaut_data",
    "clairaut_table",
    "twist_classify",
    "periodic_directions",
    "chebyshev_interior_grid",
]

_N0 = 64
_N_MAX = 2**17
_NEAR_MERIDIAN = 1e-3


def _turning_points(profile: Profile, I: np.ndarray) -> np.ndarray:
    I = np.asarray(I, dtype=float)
    if profile.inverse is not None:
        return np.asarray(profile.inverse(I), dtype=float)
    half = profile.L / 2
    lo = np.zeros_like(I)
    hi = np.full_like(I, half)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        above = profile.f(mid) > I
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    s = 0.5 * (lo + hi)
    for _ in range(3):
        f, df, _ = profile.f_eval(s)
        step = np.where(df != 0, (f - I) / np.where(df != 0, df, 1.0), 0.0)
        s_new = s - step
        s = np.where((s_new >= lo) & (s_new <= hi), s_new, s)
    return s


def turning_point(profile: Profile, I: float) -> float:
    """Turning latitude ``sigma_plus`` with ``f(sigma_plus) = I`` for ``0 < I <= 1``."""
    I = float(I)
    if not 0.0 < I <= 1.0:
        raise InvalidParameter(f"Clairaut integral must lie in (0, 1], got {I}")
    if I == 1.0:
        return 0.0
    return float(_turning_points(profile, np.array([I]))[0])


def orbit_integrands(profile: Profile, I: np.ndarray, n: int):
    """Periodic integrands on ``offset_nodes(n)`` for ``0 < I < 1``.

    Returns ``(sigma_plus, w_arc, w_theta, w_action, phi)`` where the
    integrands are arrays of shape ``(len(I), n)``:

    * ``w_arc = 1/sqrt(H)``: ``d(arc)/d(phi)``
    * ``w_theta = (I/f^2)/sqrt(H)``: ``d(theta)/d(phi)``
    * ``w_action = sigma_plus^2 cos^2(phi) sqrt(H)``
    """
    I = np.atleast_1d(np.asarray(I, dtype=float))
    sp = _turning_points(profile, I)
    phi = offset_nodes(n)
    sin, cos = np.sin(phi), np.cos(phi)
    s = sp[:, None] * sin[None, :]
    f = profile.f(s)
    # f(|sigma|)^2 - I^2 with the gap sigma_plus - |sigma| formed without cancellation
    gap = sp[:, None] * (cos * cos / (1.0 + np.abs(sin)))[None, :]
    num = profile.sq_gap(np.broadcast_to(sp[:, None], s.shape), gap)
    den_c = (sp[:, None] * cos[None, :]) ** 2
    H = num / (f * f * den_c)
    if np.any(~(H > 0)):
        raise NumericFailure("non-positive reduced integrand; turning point inaccurate")
    rH = np.sqrt(H)
    w_arc = 1.0 / rH
    w_theta = (I[:, None] / (f * f)) / rH
    w_action = den_c * rH
    return sp, w_arc, w_theta, w_action, phi


def orbit_integrals(profile: Profile, I, rtol: float = 1e-13):
    """Oscillation length, azimuthal advance and half action integral.

    Parameters
    ----------
    I : array_like
        Clairaut integrals; only ``|I|`` matters here, ``|I| <= 1``.

    Returns
    -------
    dict with arrays ``tau``, ``dtheta`` (for ``|I|``) and ``action``
    ``= int_{sigma_-}^{sigma_+} sqrt(1 - I^2/f^2) dsigma``, plus ``n`` used
    (``-1`` where the near-meridian interpolant was used).
    """
    I = np.abs(np.atleast_1d(np.asarray(I, dtype=float)))
    if np.any(I > 1.0):
        raise InvalidParameter("Clairaut integral must satisfy |I| <= 1")
    m = I.size
    tau_v = np.empty(m)
    dth_v = np.empty(m)
    act_v = np.empty(m)
    n_used = np.zeros(m, dtype=int)

    k = profile.curvature_at_equator
    top = I >= 1.0
    tau_v[top] = dth_v[top] = 2 * np.pi / np.sqrt(k)
    act_v[top] = 0.0
    zero = I == 0.0
    tau_v[zero] = 2 * profile.L
    dth_v[zero] = 2 * np.pi
    act_v[zero] = profile.L
    # near-meridian orbits need n ~ 1/I; interpolate from the meridian instead
    near = ~zero & (I < _NEAR_MERIDIAN)
    if np.any(near):
        tau_v[near], dth_v[near], act_v[near] = _near_meridian(profile)(I[near])
        n_used[near] = -1

    todo = np.flatnonzero(~top & ~zero & ~near)
    prev = None
    prev_err = np.full(todo.size, np.inf)
    n = _N0
    while todo.size:
        _, wa, wt, wg, _ = orbit_integrands(profile, I[todo], n)
        cur = np.stack([2 * np.pi * wa.mean(1), 2 * np.pi * wt.mean(1), np.pi * wg.mean(1)])
        if prev is not None:
            err = np.max(np.abs(cur - prev) / np.maximum(np.abs(cur), 1e-300), axis=0)
            # geometric convergence, or a rounding plateau once well resolved
            done = (err <= rtol) | ((err <= 1e-10) & (err >= 0.25 * prev_err))
            prev_err = err
            if n >= _N_MAX:
                if np.max(err) > 1e-9:
                    raise NumericFailure(f"Clairaut quadrature stalled at n={n}, rel err {np.max(err):.2e}")
                done[:] = True
            idx = todo[done]
            tau_v[idx], dth_v[idx], act_v[idx] = cur[:, done]
            n_used[idx] = n
            todo = todo[~done]
            cur = cur[:, ~done]
            prev_err = prev_err[~done]
        prev = cur
        n *= 2
    return {"tau": tau_v, "dtheta": dth_v, "action": act_v, "n": n_used}


_NEAR: "weakref.WeakKeyDictionary[Profile, BarycentricInterpolator]" = weakref.WeakKeyDictionary()


def _near_meridian(profile: Profile) -> BarycentricInterpolator:
    """Degree-8 interpolant of ``(tau, dtheta, action)`` on ``[0, 8e-3]``.

    The meridian values at ``I = 0`` are exact; the functions are smooth in
    ``I`` up to the meridian, so this beats direct quadrature for small ``I``.
    """
    P = _NEAR.get(profile)
    if P is None:
        nodes = np.arange(9) * _NEAR_MERIDIAN
        r = orbit_integrals(profile, nodes)
        P = BarycentricInterpolator(nodes, np.stack([r["tau"], r["dtheta"], r["action"]], axis=1))
        _NEAR[profile] = P
    return lambda I: P(I).T


def _check_open(I, allow_closed: bool = False):
    a = np.abs(np.asarray(I, dtype=float))
    bad = (a > 1.0) if allow_closed else ((a >= 1.0) | (a == 0.0))
    if np.any(bad) or np.any(~np.isfinite(a)):
        raise InvalidParameter("Clairaut integral outside the admissible range")


def _scalar_or_array(x, like):
    return float(x[0]) if np.ndim(like) == 0 else x


def tau(profile: Profile, I):
    """Oscillation length ``tau(I) = 2 int dsigma / sqrt(1 - I^2/f^2)`` (even in ``I``)."""
    _check_open(I)
    return _scalar_or_array(orbit_integrals(profile, I)["tau"], I)


def delta_theta(profile: Profile, I):
    """Azimuthal advance over one oscillation, odd in ``I``."""
    _check_open(I)
    v = orbit_integrals(profile, I)["dtheta"] * np.sign(np.atleast_1d(I))
    return _scalar_or_array(v, I)


def _extrapolate_to_one(profile, h: float = 0.01, order: int = 8) -> float:
    """Value of omega at I = 1 by polynomial extrapolation from interior points."""
    x = 1.0 - h * np.arange(1, order + 1)
    y = orbit_integrals(profile, x)["dtheta"] / (2 * np.pi) - 1.0
    c = np.polynomial.polynomial.polyfit(x - 1.0, y, order - 1)
    return float(c[0])


def omega(profile: Profile, I):
    """Normalized phase shift ``omega(I) = Delta theta / (2 pi) - 1``.

    Odd in ``I``.  ``omega(0) = 0`` by the branch convention and ``omega(+-1)``
    is obtained by polynomial extrapolation from the interior.
    """
    I_arr = np.atleast_1d(np.asarray(I, dtype=float))
    _check_open(I_arr, allow_closed=True)
    a = np.abs(I_arr)
    out = np.zeros_like(a)
    inner = (a > 0) & (a < 1)
    if np.any(inner):
        out[inner] = orbit_integrals(profile, a[inner])["dtheta"] / (2 * np.pi) - 1.0
    if np.any(a == 1.0):
        out[a == 1.0] = _extrapolate_to_one(profile)
    return _scalar_or_array(np.sign(I_arr) * out, I)


def _richardson_derivative(fun, x: float, h0: float, tol: float = 1e-9, max_iter: int = 6):
    """Central difference of ``fun`` at ``x`` refined by Richardson extrapolation."""

    def central(h):
        v = fun(np.array([x - h, x + h]))
        return (v[1] - v[0]) / (2 * h)

    h = h0
    d_prev = central(h)
    r_prev = None
    for _ in range(max_iter):
        h *= 0.5
        d = central(h)
        r = (4 * d - d_prev) / 3
        if r_prev is not None and abs(r - r_prev) <= tol * max(1.0, abs(r)):
            return r
        d_prev, r_prev = d, r
    return r_prev


def _richardson_second(fun, x: float, h0: float, tol: float = 1e-8, max_iter: int = 6):
    def second(h):
        v = fun(np.array([x - h, x, x + h]))
        return (v[0] - 2 * v[1] + v[2]) / (h * h)

    h = h0
    d_prev = second(h)
    r_prev = None
    for _ in range(max_iter):
        h *= 0.5
        d = second(h)
        r = (4 * d - d_prev) / 3
        if r_prev is not None and abs(r - r_prev) <= tol * max(1.0, abs(r)):
            return r
        d_prev, r_prev = d, r
    return r_prev


def _g_values(profile: Profile, I):
    a = np.abs(np.asarray(I, dtype=float))
    return a + orbit_integrals(profile, a)["action"] / np.pi


def _omega_values(profile: Profile, I):
    I = np.asarray(I, dtype=float)
    a = np.abs(I)
    return np.sign(I) * (orbit_integrals(profile, a)["dtheta"] / (2 * np.pi) - 1.0)


def omega_prime(profile: Profile, I: float, cross_tol: float = 1e-4, return_both: bool = False):
    """Derivative of ``omega`` by Richardson-refined central differences.

    The value is cross-checked against ``-g''(I)``, computed from the action
    function with an independent second difference.  Disagreement beyond
    ``cross_tol`` raises :class:`NumericFailure`.
    """
    I = float(I)
    if not 0.0 < I < 1.0:
        raise InvalidParameter(f"omega_prime needs 0 < I < 1, got {I}")
    h0 = min(0.02, 0.45 * (1.0 - I), 0.45 * I)
    d1 = _richardson_derivative(lambda x: _omega_values(profile, x), I, h0)
    d2 = -_richardson_second(lambda x: _g_values(profile, x), I, h0)
    if abs(d1 - d2) > cross_tol * max(1.0, abs(d1)):
        raise NumericFailure(f"omega' estimators disagree at I={I}: {d1:.3e} vs {d2:.3e}")
    return (d1, d2) if return_both else d1


@dataclass(frozen=True)
class ClairautData:
    I: float
    sigma_plus: float
    sigma_minus: float
    tau: float
    omega: float
    omega_prime: float


def clairaut_data(profile: Profile, I: float) -> ClairautData:
    """Full per-direction record for ``0 < |I| < 1``."""
    a = abs(float(I))
    _check_open(a)
    sp = turning_point(profile, a)
    res = orbit_integrals(profile, a)
    om = float(res["dtheta"][0] / (2 * np.pi) - 1.0)
    return ClairautData(
        I=float(I),
        sigma_plus=sp,
        sigma_minus=-sp,
        tau=float(res["tau"][0]),
        omega=float(np.sign(I)) * om,
        omega_prime=omega_prime(profile, a),
    )


class ClairautTable:
    """Chebyshev interpolants of ``g``, ``omega`` and ``tau`` on ``[0, 1]``.

    Built once per profile; used where thousands of evaluations are needed
    (lattice checks, action curves, smoothed kernels).  The degree is raised
    until the trailing coefficients are negligible.
    """

    def __init__(self, profile: Profile, tol: float = 1e-13, max_degree: int = 512):
        self.profile = profile
        cheb = np.polynomial.chebyshev
        deg = 32
        while True:
            j = np.arange(deg + 1)
            x = np.cos(np.pi * (j + 0.5) / (deg + 1))
            I = 0.5 * (x + 1.0)
            res = orbit_integrals(profile, I)
            g = I + res["action"] / np.pi
            om = res["dtheta"] / (2 * np.pi) - 1.0
            cg = cheb.chebfit(x, g, deg)
            co = cheb.chebfit(x, om, deg)
            ct = cheb.chebfit(x, res["tau"], deg)
            tail = max(np.max(np.abs(c[-4:])) for c in (cg, co))
            if tail <= tol or deg >= max_degree:
                break
            deg *= 2
        self.degree = deg
        self.tail = float(tail)
        self._g = cheb.Chebyshev(cg, domain=[0, 1])
        self._om = cheb.Chebyshev(co, domain=[0, 1])
        self._tau = cheb.Chebyshev(ct, domain=[0, 1])
        self._dom = self._om.deriv()
        self._dg = self._g.deriv()
        self._d2g = self._g.deriv(2)
        self.omega_at_zero = float(self._om(0.0))

    def g(self, I):
        return self._g(np.abs(I))

    def g_prime(self, I):
        return np.sign(I) * self._dg(np.abs(I))

    def g_second(self, I):
        return self._d2g(np.abs(I))

    def omega(self, I):
        return np.sign(I) * self._om(np.abs(I))

    def omega_prime(self, I):
        return self._dom(np.abs(I))

    def tau(self, I):
        return self._tau(np.abs(I))


_TABLES: "weakref.WeakKeyDictionary[Profile, ClairautTable]" = weakref.WeakKeyDictionary()


def clairaut_table(profile: Profile) -> ClairautTable:
    """Cached :class:`ClairautTable` for ``profile``."""
    tab = _TABLES.get(profile)
    if tab is None:
        tab = ClairautTable(profile)
        if abs(tab.omega_at_zero) > 1e-8:
            raise NumericFailure(
                f"omega(0+) = {tab.omega_at_zero:.3e}: the branch Delta theta(0+) = 2 pi fails"
            )
        _TABLES[profile] = tab
    return tab


def chebyshev_interior_grid(n: int) -> np.ndarray:
    """``n`` Chebyshev points of the first kind mapped into ``(0, 1)``."""
    j = np.arange(n)
    return np.sort(0.5 * (1.0 - np.cos(np.pi * (j + 0.5) / n)))


@dataclass
class TwistReport:
    cls: str
    min_omega_prime: float
    max_omega_prime: float
    grid: np.ndarray
    omega_prime: np.ndarray

    def as_dict(self) -> dict:
        return {
            "class": self.cls,
            "min_omega_prime": self.min_omega_prime,
            "max_omega_prime": self.max_omega_prime,
        }


def twist_classify(profile: Profile, n_grid: int = 16, zero_tol: float = 1e-6) -> TwistReport:
    """Classify ``omega'`` on a Chebyshev grid of ``(0, 1)``.

    Classes: ``negative-twist``, ``small-positive-twist`` (``0 < omega' < 1``),
    ``twist-only`` (positive but reaching 1), ``fails-twist`` (some
    ``|omega'| <= zero_tol``) and ``mixed-sign``.
    """
    if n_grid < 8:
        raise InvalidParameter("n_grid must be at least 8")
    grid = chebyshev_interior_grid(n_grid)
    vals = np.array([omega_prime(profile, x) for x in grid])
    lo, hi = float(vals.min()), float(vals.max())
    if lo < -zero_tol and hi > zero_tol:
        cls = "mixed-sign"
    elif np.any(np.abs(vals) <= zero_tol):
        cls = "fails-twist"
    elif hi < 0:
        cls = "negative-twist"
    elif hi < 1:
        cls = "small-positive-twist"
    else:
        cls = "twist-only"
    return TwistReport(cls, lo, hi, grid, vals)


def periodic_directions(profile: Profile, q_max: int):
    """Clairaut integrals ``I`` in ``[0, 1]`` whose geodesics are periodic.

    Returns a list of ``(I, Fraction(p, q))`` sorted by ``I`` with
    ``omega(I) = p/q`` and ``q <= q_max``.
    """
    if q_max < 1:
        raise InvalidParameter("q_max must be >= 1")
    rep = twist_classify(profile, 16)
    if rep.cls in ("fails-twist", "mixed-sign"):
        raise UnsupportedSurface(f"omega is not strictly monotone ({rep.cls})")
    w1 = omega(profile, 1.0)
    lo, hi = min(0.0, w1), max(0.0, w1)
    rats = sorted(
        {Fraction(p, q) for q in range(1, q_max + 1) for p in range(int(np.floor(lo * q)) - 1, int(np.ceil(hi * q)) + 2)}
    )
    out = []
    for r in rats:
        v = float(r)
        if v < lo - 1e-9 or v > hi + 1e-9:
            continue
        if v == 0.0:
            out.append((0.0, r))
        elif abs(v - w1) <= 1e-9:
            out.append((1.0, r))
        else:
            fun = lambda x: float(_omega_values(profile, np.array([x]))[0]) - v  # noqa: E731
            root = brentq(fun, 1e-12, 1 - 1e-12, xtol=1e-15, rtol=1e-15)
            if abs(fun(root)) > 1e-9:
                raise NumericFailure(f"periodic-direction residual too large for {r}")
            out.append((root, r))
    out.sort(key=lambda t: t[0])
    return out

"""Geodesic flow, the periodic q1-flow and the bicharacteristic length.

Coordinates are ``(theta, sigma, Theta, Sigma)`` with ``p1 = sqrt(Theta^2/f^2 + Sigma^2)``
and Clairaut integral ``I = Theta / p1``.  The q1-flow is the geodesic flow
run for time ``(t / 2 pi) tau(I)`` followed by the rotation
``theta -> theta - t omega(I)``; it is ``2 pi``-periodic and sends every
point to its antipode at time ``pi``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .action import convexity_check, little_g
from .clairaut import orbit_integrals, orbit_integrands
from .errors import InvalidParameter, NumericFailure, UnsupportedSurface
from .quadrature import PeriodicPrimitive
from .surface import Profile

__all__ = [
    "CotangentState",
    "geodesic_flow",
    "geodesic_trajectory",
    "q1_flow",
    "antipode",
    "state_distance",
    "bicharacteristic_length",
    "DProfile",
    "d_profile",
]

TWO_PI = 2.0 * np.pi
_MERIDIAN_I = 1e-12


def _wrap(x):
    """Map angles to ``(-pi, pi]``."""
    return np.pi - np.mod(np.pi - np.asarray(x, float), TWO_PI)


@dataclass(frozen=True)
class CotangentState:
    """A covector ``(Theta, Sigma)`` at the point ``(theta, sigma)``.

    ``at_pole`` is ``+1``/``-1`` for states sitting exactly on a pole, where
    only meridian covectors (``Theta = 0``) make sense; ``theta`` then labels
    the meridian along which the covector points.
    """

    theta: float
    sigma: float
    Theta: float
    Sigma: float
    at_pole: Optional[int] = None

    def p1(self, profile: Profile) -> float:
        if self.at_pole is not None:
            return abs(self.Sigma)
        f = float(profile.f(self.sigma))
        return float(np.hypot(self.Theta / f, self.Sigma))

    def clairaut(self, profile: Profile) -> float:
        p = self.p1(profile)
        if p <= 0:
            raise InvalidParameter("zero covector")
        return float(np.clip(self.Theta / p, -1.0, 1.0))

    def as_tuple(self):
        return (self.theta, self.sigma, self.Theta, self.Sigma)


def state_distance(a: CotangentState, b: CotangentState) -> float:
    """Max-norm distance with ``theta`` compared modulo ``2 pi``."""
    return float(
        max(
            abs(_wrap(a.theta - b.theta)),
            abs(a.sigma - b.sigma),
            abs(a.Theta - b.Theta),
            abs(a.Sigma - b.Sigma),
        )
    )


def _meridian(profile: Profile, s: CotangentState, t: float) -> CotangentState:
    """Exact unit-speed meridian motion; ``theta`` flips by ``pi`` at each pole."""
    L = profile.L
    p = abs(s.Sigma)
    if p == 0:
        raise InvalidParameter("zero covector")
    up = s.Sigma > 0
    s0 = s.sigma if up else -s.sigma
    u = s0 + t  # position in the travel-direction frame
    passes = np.floor((u + 0.5 * L) / L)
    v = u - passes * L  # in [-L/2, L/2)
    odd = int(passes) % 2 != 0
    sig = -v if odd else v
    going_up = not odd
    if not up:
        sig, going_up = -sig, not going_up
    Sig = p if going_up else -p
    pole = None
    if abs(abs(sig) - 0.5 * L) < 1e-15:
        pole = int(np.sign(sig))
    return CotangentState(float(np.mod(s.theta + np.pi * passes, TWO_PI)), float(sig), 0.0, Sig, pole)


def _rhs(profile: Profile, Theta: float):
    def rhs(_t, y):
        sigma, Sigma = y[1], y[2]
        f, df, _ = profile.f_eval(np.asarray(sigma))
        f = float(f)
        p1 = np.sqrt((Theta / f) ** 2 + Sigma**2)
        return [Theta / (f * f * p1), Sigma / p1, Theta * Theta * float(df) / (f**3 * p1)]

    return rhs


def geodesic_flow(profile: Profile, state: CotangentState, t: float, tol: float = 1e-11, return_info: bool = False):
    """Geodesic (``p1``) flow for time ``t``.

    DOP853 with ``rtol = atol = tol``; ``Theta`` is an exact constant of
    motion and is not integrated.  Meridian covectors (``|I| < 1e-12``) are
    advanced by the exact formula.

    Returns
    -------
    CotangentState, or ``(state, info)`` with ``info`` holding the drift of
    ``p1`` and ``Theta`` and the number of right-hand-side evaluations.
    """
    if tol <= 0:
        raise InvalidParameter("tol must be positive")
    p_start = state.p1(profile)
    if p_start <= 0:
        raise InvalidParameter("zero covector")
    if t < 0:
        back = CotangentState(state.theta, state.sigma, -state.Theta, -state.Sigma, state.at_pole)
        out = geodesic_flow(profile, back, -t, tol, return_info)
        st, info = out if return_info else (out, None)
        st = CotangentState(st.theta, st.sigma, -st.Theta, -st.Sigma, st.at_pole)
        return (st, info) if return_info else st
    if state.at_pole is not None or abs(state.Theta) < _MERIDIAN_I * p_start:
        if state.at_pole is not None and state.Theta != 0:
            raise InvalidParameter("pole states carry meridian covectors only")
        out = _meridian(profile, replace(state, Theta=0.0), t)
        info = {"p1_drift": 0.0, "Theta_drift": 0.0, "nfev": 0, "meridian": True}
        return (out, info) if return_info else out
    sol = solve_ivp(
        _rhs(profile, state.Theta),
        (0.0, t),
        [state.theta, state.sigma, state.Sigma],
        method="DOP853",
        rtol=tol,
        atol=tol,
    )
    if not sol.success:
        raise NumericFailure(f"geodesic integration failed: {sol.message}")
    th, sg, Sg = sol.y[:, -1]
    out = CotangentState(float(np.mod(th, TWO_PI)), float(sg), state.Theta, float(Sg))
    info = {
        "p1_drift": abs(out.p1(profile) - p_start),
        "Theta_drift": 0.0,
        "nfev": int(sol.nfev),
        "meridian": False,
    }
    return (out, info) if return_info else out


def geodesic_trajectory(profile: Profile, state: CotangentState, t_grid, tol: float = 1e-11) -> np.ndarray:
    """Rows ``(t, theta, sigma, Theta, Sigma, p1, I)`` on ``t_grid`` (t >= 0, increasing)."""
    t_grid = np.asarray(t_grid, float)
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) < 0):
        raise InvalidParameter("t_grid must be non-negative and increasing")
    rows = []
    cur, t_cur = state, 0.0
    for t in t_grid:
        if t > t_cur:
            cur = geodesic_flow(profile, cur, t - t_cur, tol)
            t_cur = t
        p1 = cur.p1(profile)
        rows.append((t, cur.theta, cur.sigma, cur.Theta, cur.Sigma, p1, cur.Theta / p1))
    return np.array(rows)


def _period_data(profile: Profile, I: float):
    """``tau(|I|)`` and the signed ``omega(I)``."""
    a = abs(I)
    if a < _MERIDIAN_I:
        return 2 * profile.L, 0.0
    r = orbit_integrals(profile, min(a, 1.0))
    return float(r["tau"][0]), float(np.sign(I) * (r["dtheta"][0] / TWO_PI - 1.0))


def q1_flow(profile: Profile, state: CotangentState, t: float, tol: float = 1e-11) -> CotangentState:
    """Hamiltonian flow of ``q1`` for time ``t``."""
    I = state.clairaut(profile)
    tau_I, om = _period_data(profile, I)
    g = geodesic_flow(profile, state, (t / TWO_PI) * tau_I, tol)
    # the rescaled geodesic flow carries the covector normalization p1 -> q1 implicitly
    return replace(g, theta=float(np.mod(g.theta - t * om, TWO_PI)))


def antipode(state: CotangentState, profile: Optional[Profile] = None) -> CotangentState:
    """Antipodal map ``(theta + pi, -sigma, Theta, -Sigma)``.

    Pole states are transported along their meridian for time ``L`` when a
    profile is given; the result is the same covector as the coordinate
    formula, written in the meridian chart.
    """
    if state.at_pole is not None and profile is not None:
        return _meridian(profile, state, profile.L)
    pole = -state.at_pole if state.at_pole is not None else None
    return CotangentState(
        float(np.mod(state.theta + np.pi, TWO_PI)), -state.sigma, state.Theta, -state.Sigma, pole
    )


# ---------------------------------------------------------------------------
# bicharacteristic length


class _Orbit:
    """A geodesic with Clairaut integral ``I`` (``0 < |I| < 1``) in the phase ``phi``.

    ``sigma = sigma_plus sin(phi)`` with ``phi`` increasing along the
    motion; arc length and ``theta`` are spectral primitives in ``phi``.
    """

    __slots__ = ("I", "sp", "A", "T", "tau", "omega")

    def __init__(self, profile: Profile, I: float):
        a = abs(I)
        n = 128
        while True:
            sp, wa, wt, _, _ = orbit_integrands(profile, np.array([a]), n)
            A = PeriodicPrimitive(wa[0])
            T = PeriodicPrimitive(wt[0])
            if max(A.tail / A.mean, T.tail / T.mean) < 1e-14 or n >= 1 << 15:
                break
            n *= 2
        self.I = I
        self.sp = float(sp[0])
        self.A, self.T = A, T
        self.tau = TWO_PI * float(A.mean)
        self.omega = float(np.sign(I)) * (float(T.mean) - 1.0)


def _start_phase(sp: float, sigma1: float, north: bool) -> float:
    r = np.clip(sigma1 / sp, -1.0, 1.0)
    a = float(np.arcsin(r))
    return a if north else np.pi - a


def _crossings(orb: _Orbit, phi1: float, sigma2: float):
    """``(s, dtheta)`` of the crossings of latitude ``sigma2`` for q1-time in ``(0, pi]``."""
    if abs(sigma2) > orb.sp * (1 + 1e-12):
        return []
    a = float(np.arcsin(np.clip(sigma2 / orb.sp, -1.0, 1.0)))
    out = []
    A1, T1 = orb.A(phi1), orb.T(phi1)
    sgn = 1.0 if orb.I > 0 else -1.0
    for branch, base in ((0, a), (1, np.pi - a)):
        off = np.mod(base - phi1, TWO_PI)
        if off <= 0.0 or off > np.pi + 1e-13:
            continue
        phi = phi1 + off
        s = TWO_PI * (orb.A(phi) - A1) / orb.tau
        dth = sgn * (orb.T(phi) - T1) - s * orb.omega
        out.append((branch, float(s), float(dth)))
    return out


class _Fan:
    """Orbits leaving latitude ``sigma1`` on a grid of directions ``alpha``."""

    def __init__(self, profile: Profile, sigma1: float, n_alpha: int = 720):
        self.profile = profile
        self.sigma1 = sigma1
        self.f1 = float(profile.f(sigma1))
        al = -np.pi + TWO_PI * (np.arange(n_alpha) + 0.5) / n_alpha
        self.alpha = al
        self.data = [self._orbit(a) for a in al]
        self._cache = {}

    def _orbit(self, alpha: float):
        I = self.f1 * np.cos(alpha)
        if abs(I) < 1e-9 or abs(I) >= 1.0:
            return None
        orb = _Orbit(self.profile, I)
        return orb, _start_phase(orb.sp, self.sigma1, np.sin(alpha) > 0)

    def sample(self, sigma2: float):
        """Crossing data on the direction grid refined by the fold directions.

        At a fold ``|I| = f(sigma2)`` the orbit is tangent to the target
        latitude and the two crossing branches merge.
        """
        # both ends of the periodic direction interval close the scan
        alphas = list(self.alpha) + [-np.pi, np.pi]
        items = list(self.data) + [self._orbit(-np.pi)] * 2
        r = float(self.profile.f(sigma2)) / self.f1
        if r <= 1.0 + 1e-13:
            r = min(r, 1.0)
            for c in (np.arccos(r), np.arccos(-r)):
                for a in (c, -c):
                    alphas.append(float(a))
                    items.append(self._orbit(float(a)))
        order = np.argsort(alphas)
        alphas = [alphas[i] for i in order]
        samples = []
        for i in order:
            item = items[i]
            d = {}
            if item is not None:
                for br, s, th in _crossings(item[0], item[1], sigma2):
                    d[br] = (s, th)
            samples.append(d)
        return alphas, samples

    def crossings(self, alpha: float, sigma2: float):
        item = self._orbit(alpha)
        if item is None:
            return []
        return _crossings(item[0], item[1], sigma2)


_FANS: "weakref.WeakKeyDictionary[Profile, dict]" = weakref.WeakKeyDictionary()
_CERT: "weakref.WeakKeyDictionary[Profile, bool]" = weakref.WeakKeyDictionary()


def _fan(profile: Profile, sigma1: float) -> _Fan:
    store = _FANS.setdefault(profile, {})
    key = round(float(sigma1), 15)
    fan = store.get(key)
    if fan is None:
        if len(store) > 64:
            store.clear()
        fan = _Fan(profile, float(sigma1))
        store[key] = fan
    return fan


def _certified(profile: Profile) -> bool:
    ok = _CERT.get(profile)
    if ok is None:
        ok = convexity_check(profile).passed
        _CERT[profile] = ok
    return ok


def _as_point(p):
    th, sg = (float(v) for v in p)
    return th, sg


_FOLD_TOL = 1e-7


def _psi_solve(profile: Profile, x, y, tol: float = 1e-13):
    """Return ``(psi, I)`` where ``I`` is the Clairaut integral of the connecting
    bicharacteristic (``nan`` when not defined)."""
    th1, s1 = _as_point(x)
    th2, s2 = _as_point(y)
    h = 0.5 * profile.L
    if abs(s1) > h + 1e-15 or abs(s2) > h + 1e-15:
        raise InvalidParameter("latitude outside [-L/2, L/2]")
    dth = float(_wrap(th2 - th1))
    pole1 = abs(abs(s1) - h) < 1e-14
    pole2 = abs(abs(s2) - h) < 1e-14
    same_point = abs(s1 - s2) < 1e-14 and (abs(dth) < 1e-14 or pole1)
    if same_point:
        return 0.0, np.nan
    anti = abs(s1 + s2) < 1e-14 and (abs(abs(dth) - np.pi) < 1e-14 or pole1)
    if anti:
        return np.pi, np.nan
    if pole1 or pole2:
        # every bicharacteristic through a pole is a meridian
        pole_lat = s1 if pole1 else s2
        other = s2 if pole1 else s1
        return np.pi * abs(pole_lat - other) / profile.L, 0.0
    if abs(dth) < 1e-14:
        return np.pi * abs(s2 - s1) / profile.L, 0.0
    if abs(abs(dth) - np.pi) < 1e-14:
        return np.pi * min(profile.L - s1 - s2, profile.L + s1 + s2) / profile.L, 0.0
    if abs(s1) < 1e-15 and abs(s2) < 1e-15:
        # the equator is a bicharacteristic run at unit q1-speed
        return abs(dth), float(np.sign(dth))

    fan = _fan(profile, s1)
    key = round(s2, 15)
    table = fan._cache.get(key)
    if table is None:
        table = fan.sample(s2)
        fan._cache[key] = table
    alphas, samples = table

    best = (np.inf, np.nan)
    # closest tangential sample; fold values carry sqrt(eps) phase noise
    near = (np.inf, np.inf, np.nan)
    for br in (0, 1):
        for j in range(len(alphas) - 1):
            v0, v1 = samples[j].get(br), samples[j + 1].get(br)
            if v0 is not None and 1e-12 < v0[0]:
                m = abs(float(_wrap(v0[1] - dth)))
                if m < near[0]:
                    near = (m, v0[0], fan.f1 * np.cos(alphas[j]))
            if v0 is None or v1 is None:
                continue
            m0 = float(_wrap(v0[1] - dth))
            m1 = float(_wrap(v1[1] - dth))
            if m0 == 0.0:
                cand = (alphas[j], v0[0])
            elif m0 * m1 < 0 and abs(m1 - m0) < np.pi:
                def mis(a, br=br):
                    for b, s, d in fan.crossings(a, s2):
                        if b == br:
                            return float(_wrap(d - dth))
                    raise NumericFailure("crossing lost during refinement")

                try:
                    a_star = brentq(mis, alphas[j], alphas[j + 1], xtol=tol, rtol=1e-15, maxiter=200)
                except (ValueError, NumericFailure):
                    continue
                hit = [s for b, s, _ in fan.crossings(a_star, s2) if b == br]
                if not hit:
                    continue
                cand = (a_star, hit[0])
            else:
                continue
            a_star, s = cand
            if 1e-12 < s < best[0]:
                best = (s, fan.f1 * np.cos(a_star))
    if not np.isfinite(best[0]) and near[0] <= _FOLD_TOL:
        best = (near[1], near[2])
    if not np.isfinite(best[0]):
        raise NumericFailure("no bicharacteristic found joining the two points")
    return float(best[0]), float(best[1])


def bicharacteristic_length(profile: Profile, x, y) -> float:
    """Minimal q1-flow time ``psi(x, y)`` in ``[0, pi]`` joining ``x = (theta, sigma)`` to ``y``.

    The directions leaving ``x`` are swept; for each, the crossing times of
    the latitude of ``y`` are explicit in the phase variable and the
    azimuthal mismatch is solved for by Brent's method.

    Raises
    ------
    UnsupportedSurface
        If the convexity criterion does not certify the surface.
    """
    if not _certified(profile):
        raise UnsupportedSurface("convexity criterion not certified for this surface")
    return _psi_solve(profile, x, y)[0]


@dataclass
class DProfile:
    """``d(sigma, t) = psi((t, sigma), (0, sigma))`` with derivatives on a grid."""

    sigma: float
    t: np.ndarray
    d: np.ndarray
    dt: np.ndarray
    dtt: np.ndarray
    dt_fd: np.ndarray
    theta0: float

    def equator_ratio(self, normalized: bool = True) -> np.ndarray:
        """``(1 - dt/c)/(sigma^2 tan^2(t/2))`` with ``c = Theta0`` or ``c = 1``."""
        c = self.theta0 if normalized else 1.0
        return (1.0 - self.dt / c) / (self.sigma**2 * np.tan(0.5 * self.t) ** 2)


def d_profile(profile: Profile, sigma: float, t_grid, h: float = 1e-2) -> DProfile:
    """Sample ``d(sigma, t)`` and its first two ``t``-derivatives.

    ``dt`` is the exact Hamilton-Jacobi value ``-I/g(I)`` for the connecting
    bicharacteristic; ``dt_fd`` is a fourth-order finite difference of ``d``
    kept as a cross-check, and ``dtt`` a fourth-order difference of ``dt``.
    ``theta0 = f(sigma)/g(f(sigma))`` is the limit of ``dt`` as ``t -> 0+``.
    """
    if not abs(sigma) < 0.5 * profile.L - 0.05:
        raise InvalidParameter("sigma too close to a pole")
    t_grid = np.asarray(t_grid, float)
    if np.any((np.abs(t_grid) >= np.pi) | (t_grid == 0)):
        raise InvalidParameter("t_grid must lie in (-pi, pi) without 0")
    if not _certified(profile):
        raise UnsupportedSurface("convexity criterion not certified for this surface")

    def dval(t):
        return _psi_solve(profile, (t, sigma), (0.0, sigma))

    def slope(t):
        if abs(sigma) < 1e-15:
            return float(np.sign(t))
        _, I = dval(t)
        return -I / float(little_g(profile, I))

    d = np.empty_like(t_grid)
    dt = np.empty_like(t_grid)
    dtt = np.empty_like(t_grid)
    dfd = np.empty_like(t_grid)
    for i, t in enumerate(t_grid):
        d[i] = dval(t)[0]
        dt[i] = slope(t)
        hh = min(h, 0.3 * abs(t), 0.3 * (np.pi - abs(t)))
        dm2, dm1, dp1, dp2 = (dval(t + k * hh)[0] for k in (-2, -1, 1, 2))
        dfd[i] = (dm2 - 8 * dm1 + 8 * dp1 - dp2) / (12 * hh)
        sm2, sm1, sp1, sp2 = (slope(t + k * hh) for k in (-2, -1, 1, 2))
        dtt[i] = (sm2 - 8 * sm1 + 8 * sp1 - sp2) / (12 * hh)
    f = float(profile.f(sigma))
    theta0 = f / float(little_g(profile, f))
    return DProfile(float(sigma), t_grid, d, dt, dtt, dfd, theta0)

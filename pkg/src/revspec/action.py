"""Global action variable ``q1 = G(p1, p2)`` and the curves built from it.

``G(p1, p2) = p1 * g(p2 / p1)`` where ``g(I) = |I| + (1/pi) int sqrt(1 - I^2/f^2)``
over ``[sigma_minus(I), sigma_plus(I)]``.  The level ``{q1 = 1}`` inside the
cone ``|q2| <= q1`` is the curve ``gamma0 = {(g(I), I)}``; it is closed by a
polynomial arc through ``(-1, 0)`` into the star-shaped curve ``gamma``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .clairaut import _richardson_derivative, clairaut_table, orbit_integrals, omega
from .errors import ClosureFailure, InvalidParameter, OutsideCone
from .quadrature import gauss_legendre
from .surface import Profile

__all__ = [
    "big_G",
    "little_g",
    "q1_symbol",
    "g_prime_check",
    "CurvePiece",
    "ActionCurve",
    "gamma_curve",
    "NSigmaCurve",
    "n_sigma_curve",
    "ConvexityReport",
    "convexity_check",
    "OracleReport",
    "symbol_derivative_oracles",
]


def little_g(profile: Profile, I):
    """Bleher's function ``g(I) = G(1, |I|)``, even in ``I``."""
    a = np.abs(np.asarray(I, dtype=float))
    if np.any(a > 1.0 + 1e-15):
        raise OutsideCone("little_g needs |I| <= 1")
    a = np.minimum(a, 1.0)
    v = a + orbit_integrals(profile, a)["action"] / np.pi
    return float(v[0]) if np.ndim(I) == 0 else v


def big_G(profile: Profile, p1, p2):
    """Action ``q1 = G(p1, p2)`` for ``p1 > 0`` and ``|p2| <= p1``."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    if np.any(p1 <= 0):
        raise InvalidParameter("p1 must be positive")
    if np.any(np.abs(p2) > p1 * (1 + 1e-15)):
        raise OutsideCone("|p2| > p1: covector outside the cone")
    return p1 * little_g(profile, p2 / p1)


def q1_symbol(profile: Profile, sigma, Theta, Sigma, table=None):
    """``q1(sigma, Theta, Sigma) = G(p1, Theta)`` with ``p1 = sqrt(Theta^2/f^2 + Sigma^2)``.

    Uses the cached Chebyshev table of ``g`` unless ``table=False``.
    """
    sigma, Theta, Sigma = np.broadcast_arrays(
        np.asarray(sigma, float), np.asarray(Theta, float), np.asarray(Sigma, float)
    )
    f = profile.f(sigma)
    p1 = np.sqrt((Theta / f) ** 2 + Sigma**2)
    I = np.clip(np.abs(Theta) / np.where(p1 > 0, p1, 1.0), 0.0, 1.0)
    if table is False:
        g = little_g(profile, I.ravel()).reshape(I.shape)
    else:
        g = clairaut_table(profile).g(I)
    return p1 * g


def g_prime_check(profile: Profile, I_grid) -> float:
    """``max |g'(I) + omega(I)|`` with ``g'`` from Richardson central differences."""
    I_grid = np.asarray(I_grid, dtype=float)
    if np.any((I_grid <= 0) | (I_grid >= 1)):
        raise InvalidParameter("I_grid must be interior to (0, 1)")
    res = 0.0
    om = omega(profile, I_grid)
    for I, w in zip(I_grid, np.atleast_1d(om)):
        h0 = min(0.02, 0.45 * (1 - I), 0.9 * I)
        d = _richardson_derivative(lambda x: little_g(profile, x), float(I), h0, tol=1e-11)
        res = max(res, abs(d + w))
    return float(res)


@dataclass
class CurvePiece:
    """Parametric plane arc ``P(v)``, ``v`` in ``[v0, v1]``, with derivatives."""

    v0: float
    v1: float
    P: Callable
    dP: Callable
    d2P: Callable
    d3P: Optional[Callable] = None
    name: str = ""

    def speed(self, v):
        d = self.dP(v)
        return np.hypot(d[..., 0], d[..., 1])

    def length(self, n_panels: int = 64) -> float:
        edges = np.linspace(self.v0, self.v1, n_panels + 1)
        tot = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(16, a, b)
            tot += float(np.sum(w * self.speed(x)))
        return tot


def _det(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


@dataclass
class ActionCurve:
    """Closed (or open) plane curve sampled by arc length.

    Attributes
    ----------
    u, h, tangent, curvature : arrays
        Arc-length samples, points, unit tangents and signed curvature.
    total_length : float
    closed : bool
    pieces : list of CurvePiece
        Exact parametric description used for quadrature.
    inflections : list of dict
        Inflection points found on the pieces, with an ``ordinary`` flag.
    """

    u: np.ndarray
    h: np.ndarray
    tangent: np.ndarray
    curvature: np.ndarray
    total_length: float
    closed: bool
    pieces: List[CurvePiece]
    inflections: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @classmethod
    def from_pieces(cls, pieces: List[CurvePiece], n: int, closed: bool = True, **info) -> "ActionCurve":
        lengths = np.array([p.length() for p in pieces])
        total = float(lengths.sum())
        starts = np.concatenate([[0.0], np.cumsum(lengths)])
        u = np.arange(n) * total / n if closed else np.linspace(0.0, total, n)
        pts = np.empty((n, 2))
        tan = np.empty((n, 2))
        kap = np.empty(n)
        for k, piece in enumerate(pieces):
            sel = (u >= starts[k]) & ((u < starts[k + 1]) | (k == len(pieces) - 1))
            if not np.any(sel):
                continue
            # invert the arc length on this piece
            vv = np.linspace(piece.v0, piece.v1, 2049)
            sp = piece.speed(vv)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * (sp[1:] + sp[:-1]) * np.diff(vv))])
            cum *= lengths[k] / cum[-1]
            target = u[sel] - starts[k]
            v = np.interp(target, cum, vv)
            for _ in range(4):
                # Newton on arc(v) - target with the exact speed
                arc = np.array([_arc(piece, piece.v0, vi) for vi in v])
                v = np.clip(v - (arc - target) / piece.speed(v), piece.v0, piece.v1)
            d1, d2 = piece.dP(v), piece.d2P(v)
            s = np.hypot(d1[:, 0], d1[:, 1])
            pts[sel] = piece.P(v)
            tan[sel] = d1 / s[:, None]
            kap[sel] = _det(d1, d2) / s**3
        return cls(u, pts, tan, kap, total, closed, list(pieces), info=dict(info))

    def weighted_length(self) -> float:
        """``int |det(h', h)| du`` over the curve."""
        tot = 0.0
        for p in self.pieces:
            edges = np.linspace(p.v0, p.v1, 65)
            for a, b in zip(edges[:-1], edges[1:]):
                x, w = gauss_legendre(16, a, b)
                tot += float(np.sum(w * np.abs(_det(p.dP(x), p.P(x)))))
        return tot

    def shoelace_area(self) -> float:
        x, y = self.h[:, 0], self.h[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def winding_number(self) -> float:
        ang = np.unwrap(np.arctan2(self.h[:, 1], self.h[:, 0]))
        close = np.arctan2(self.h[0, 1], self.h[0, 0]) - np.arctan2(self.h[-1, 1], self.h[-1, 0])
        close = (close + np.pi) % (2 * np.pi) - np.pi
        return float((ang[-1] - ang[0] + close) / (2 * np.pi))


def _arc(piece: CurvePiece, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    m = max(1, int(np.ceil(16 * (b - a) / max(piece.v1 - piece.v0, 1e-300))))
    edges = np.linspace(a, b, m + 1)
    tot = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = gauss_legendre(16, lo, hi)
        tot += float(np.sum(w * piece.speed(x)))
    return tot


def _closure_polynomials(w1: float, dw1: float, S: float):
    """Even ``X`` (degree 6) and odd ``Y`` (degree 5) on ``[-S, S]``.

    At ``s = -S`` they match ``(g, I)`` at ``I = 1`` to second order in the
    common parameter, with ``g'(1) = -omega(1)`` and ``g''(1) = -omega'(1)``;
    ``X(0) = -1`` and ``Y(0) = 0``.  Evenness/oddness gives the matching at
    ``s = S`` with ``I = -1`` for free.
    """
    P = np.polynomial.polynomial
    # Y = a1 s + a3 s^3 + a5 s^5 with Y(-S) = 1, Y'(-S) = 1, Y''(-S) = 0
    A = np.array(
        [[-S, -(S**3), -(S**5)], [1.0, 3 * S**2, 5 * S**4], [0.0, -6 * S, -20 * S**3]]
    )
    a1, a3, a5 = np.linalg.solve(A, [1.0, 1.0, 0.0])
    # X = -1 + b2 s^2 + b4 s^4 + b6 s^6 with X(-S) = 1, X'(-S) = -w1, X''(-S) = -dw1
    B = np.array(
        [[S**2, S**4, S**6], [-2 * S, -4 * S**3, -6 * S**5], [2.0, 12 * S**2, 30 * S**4]]
    )
    b2, b4, b6 = np.linalg.solve(B, [2.0, -w1, -dw1])
    X = np.array([-1.0, 0.0, b2, 0.0, b4, 0.0, b6])
    Y = np.array([0.0, a1, 0.0, a3, 0.0, a5])
    return X, Y, P


def _poly_piece(X, Y, S: float) -> CurvePiece:
    P = np.polynomial.polynomial
    dX, dY = P.polyder(X), P.polyder(Y)
    d2X, d2Y = P.polyder(X, 2), P.polyder(Y, 2)
    d3X, d3Y = P.polyder(X, 3), P.polyder(Y, 3)

    def mk(cx, cy):
        return lambda s: np.stack([P.polyval(s, cx), P.polyval(s, cy)], axis=-1)

    return CurvePiece(-S, S, mk(X, Y), mk(dX, dY), mk(d2X, d2Y), mk(d3X, d3Y), name="closure")


def _gamma0_piece(profile: Profile, I0: float, I1: float) -> CurvePiece:
    tab = clairaut_table(profile)
    d2om = tab._om.deriv(2)

    def P(v):
        v = np.asarray(v, float)
        return np.stack([tab.g(v), v], axis=-1)

    def dP(v):
        v = np.asarray(v, float)
        return np.stack([-tab.omega(v), np.ones_like(v)], axis=-1)

    def d2P(v):
        v = np.asarray(v, float)
        return np.stack([-tab.omega_prime(v), np.zeros_like(v)], axis=-1)

    def d3P(v):
        v = np.asarray(v, float)
        return np.stack([-np.sign(v) * d2om(np.abs(v)), np.zeros_like(v)], axis=-1)

    return CurvePiece(I0, I1, P, dP, d2P, d3P, name="gamma0")


def _closure_inflections(piece: CurvePiece, X, Y):
    P = np.polynomial.polynomial
    k = P.polysub(
        P.polymul(P.polyder(X), P.polyder(Y, 2)), P.polymul(P.polyder(Y), P.polyder(X, 2))
    )
    k = np.trim_zeros(k, "b")
    if len(k) <= 1:
        return []
    dk = P.polyder(k)
    scale = np.max(np.abs(k))
    out = []
    for r in P.polyroots(k):
        if abs(r.imag) < 1e-9 and piece.v0 <= r.real <= piece.v1:
            s = float(r.real)
            slope = float(P.polyval(s, dk))
            out.append({"s": s, "point": piece.P(s).tolist(), "ordinary": abs(slope) > 1e-8 * scale})
    return out


def gamma_curve(profile: Profile, n: int = 512, closure_S: Optional[float] = None) -> ActionCurve:
    """Closed action curve ``gamma`` sampled by arc length.

    Starts at ``(g(0), 0)`` and runs counter-clockwise: ``gamma0`` for
    ``I`` from 0 to 1, the closing arc through ``(-1, 0)``, then ``gamma0``
    for ``I`` from -1 to 0.
    """
    if n < 64:
        raise InvalidParameter("n must be at least 64")
    tab = clairaut_table(profile)
    w1 = float(tab.omega(1.0))
    dw1 = float(tab.omega_prime(1.0))
    candidates = [closure_S] if closure_S is not None else [2.0, 1.5, 2.5, 3.0, 1.25, 3.5, 4.0]
    g0_up = _gamma0_piece(profile, 0.0, 1.0)
    g0_lo = _gamma0_piece(profile, -1.0, 0.0)
    reasons = []
    for S in candidates:
        X, Y, _ = _closure_polynomials(w1, dw1, S)
        cl = _poly_piece(X, Y, S)
        s = np.linspace(-S, S, 4001)
        star = np.min(_det(cl.P(s), cl.dP(s)))
        infl = _closure_inflections(cl, X, Y)
        if star <= 0:
            reasons.append(f"S={S}: not star-shaped")
            continue
        if not all(i["ordinary"] for i in infl):
            reasons.append(f"S={S}: degenerate inflection")
            continue
        curve = ActionCurve.from_pieces([g0_up, cl, g0_lo], n, closed=True, closure_S=S)
        curve.inflections = infl
        I = np.linspace(-1, 1, 2001)
        om_p = tab.omega_prime(I)
        curve.info["gamma0_curvature_sign"] = (
            "zero" if np.max(np.abs(om_p)) < 1e-9 else ("constant" if np.all(om_p > 0) or np.all(om_p < 0) else "changes")
        )
        if np.min(_det(curve.h, curve.tangent)) <= 0:
            reasons.append(f"S={S}: det(h, h') <= 0 on samples")
            continue
        return curve
    raise ClosureFailure("no admissible closure; " + "; ".join(reasons))


@dataclass
class NSigmaCurve:
    w: np.ndarray
    points: np.ndarray
    length: float
    radius_min: float
    radius_max: float
    sigma: float


def n_sigma_curve(profile: Profile, sigma: float, n: int = 256) -> NSigmaCurve:
    """Unit level ``{q1(sigma, .) = 1}`` of the fibre over latitude ``sigma``.

    Sampled at constant speed, positively oriented and starting on the
    positive ``Theta`` axis.
    """
    if not abs(sigma) < profile.L / 2:
        raise InvalidParameter("|sigma| must be < L/2")
    m = 16 * n
    psi = 2 * np.pi * np.arange(m) / m
    e = np.stack([np.cos(psi), np.sin(psi)], axis=1)
    r = 1.0 / q1_symbol(profile, sigma, e[:, 0], e[:, 1])
    pts = r[:, None] * e
    seg = np.hypot(*(np.roll(pts, -1, axis=0) - pts).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    length = float(cum[-1])
    target = np.arange(n) * length / n
    psi_ext = np.concatenate([psi, [2 * np.pi]])
    psi_t = np.interp(target, cum, psi_ext)
    e_t = np.stack([np.cos(psi_t), np.sin(psi_t)], axis=1)
    r_t = 1.0 / q1_symbol(profile, sigma, e_t[:, 0], e_t[:, 1])
    return NSigmaCurve(
        w=2 * np.pi * np.arange(n) / n,
        points=r_t[:, None] * e_t,
        length=length,
        radius_min=float(r.min()),
        radius_max=float(r.max()),
        sigma=float(sigma),
    )


@dataclass
class ConvexityReport:
    passed: bool
    min_abs_E: float
    sign_constant: np.ndarray
    sigma_grid: np.ndarray
    p_fractions: np.ndarray
    E: np.ndarray
    omega_prime_negative: bool
    omega_prime_in_unit_interval: bool

    def as_dict(self) -> dict:
        return {
            "passed": bool(self.passed),
            "min_abs_E": float(self.min_abs_E),
            "sigma_with_sign_change": [float(s) for s, ok in zip(self.sigma_grid, self.sign_constant) if not ok],
            "sufficient_omega_prime_negative": bool(self.omega_prime_negative),
            "sufficient_omega_prime_in_0_1": bool(self.omega_prime_in_unit_interval),
        }


def convexity_check(profile: Profile, sigma_grid=None, p_grid=None) -> ConvexityReport:
    """Single-signedness of ``E(p) = g''(p)(1 - p^2/f^2) + (g - p g')/f^2``.

    Parameters
    ----------
    sigma_grid : array_like, optional
        Latitudes strictly inside ``(-L/2, L/2)``.
    p_grid : array_like, optional
        Fractions in ``(0, 1)``; ``p = fraction * f(sigma)``.
    """
    h = profile.L / 2
    if sigma_grid is None:
        sigma_grid = np.linspace(-h, h, 43)[1:-1]
    if p_grid is None:
        p_grid = np.sort(0.5 * (1 - np.cos(np.pi * (np.arange(40) + 0.5) / 40)))
    sigma_grid = np.asarray(sigma_grid, float)
    p_grid = np.asarray(p_grid, float)
    if np.any(np.abs(sigma_grid) >= h) or np.any((p_grid <= 0) | (p_grid >= 1)):
        raise InvalidParameter("grids must be interior to their ranges")
    tab = clairaut_table(profile)
    f = profile.f(sigma_grid)[:, None]
    p = p_grid[None, :] * f
    g, dg, d2g = tab.g(p), tab.g_prime(p), tab.g_second(p)
    E = d2g * (1 - p**2 / f**2) + (g - p * dg) / f**2
    sign_ok = np.all(E > 0, axis=1) | np.all(E < 0, axis=1)
    I = np.linspace(0, 1, 201)
    om_p = tab.omega_prime(I)
    return ConvexityReport(
        passed=bool(np.all(sign_ok)),
        min_abs_E=float(np.min(np.abs(E))),
        sign_constant=sign_ok,
        sigma_grid=sigma_grid,
        p_fractions=p_grid,
        E=E,
        omega_prime_negative=bool(np.all(om_p < 0)),
        omega_prime_in_unit_interval=bool(np.all((om_p > 0) & (om_p < 1))),
    )


@dataclass
class OracleReport:
    points: np.ndarray
    d_Sigma: np.ndarray
    d_SigmaSigma: np.ndarray
    d_sigma: np.ndarray
    sigma_sign_ok: bool
    horizontal_zero_ok: bool
    min_theta_dSS: float
    min_dsigma_over_sigma: float
    equator_dsigma_max: float

    @property
    def passed(self) -> bool:
        return (
            self.sigma_sign_ok
            and self.horizontal_zero_ok
            and self.min_theta_dSS > 0
            and self.min_dsigma_over_sigma > 0
            and self.equator_dsigma_max <= 1e-6
        )


def _fd(fun, x, h):
    """First and second derivative with one Richardson step."""
    f0 = fun(x)
    d1 = lambda s: (fun(x + s) - fun(x - s)) / (2 * s)  # noqa: E731
    d2 = lambda s: (fun(x + s) - 2 * f0 + fun(x - s)) / (s * s)  # noqa: E731
    return (4 * d1(h / 2) - d1(h)) / 3, (4 * d2(h / 2) - d2(h)) / 3


def symbol_derivative_oracles(profile: Profile, points) -> OracleReport:
    """Finite-difference derivatives of ``q1`` at ``(sigma, Theta, Sigma)`` points.

    Checks that ``d_Sigma q1`` has the sign of ``Sigma`` and vanishes on
    horizontal covectors, that ``Theta * d_SigmaSigma q1`` stays away from 0
    when ``Sigma = 0``, and that ``d_sigma q1 / sigma`` is positive off the
    equator (for ``Theta != 0``).
    """
    pts = np.atleast_2d(np.asarray(points, float))
    n = len(pts)
    dS = np.empty(n)
    dSS = np.empty(n)
    ds = np.empty(n)
    for i, (s, T, Sg) in enumerate(pts):
        h = 1e-3 * max(1.0, np.hypot(T, Sg))
        dS[i], dSS[i] = _fd(lambda x: float(q1_symbol(profile, s, T, x)), Sg, h)
        ds[i], _ = _fd(lambda x: float(q1_symbol(profile, x, T, Sg)), s, 1e-3)
    horiz = pts[:, 2] == 0
    off = ~horiz
    sign_ok = bool(np.all(np.sign(dS[off]) == np.sign(pts[off, 2]))) if np.any(off) else True
    zero_ok = bool(np.all(np.abs(dS[horiz]) <= 1e-6)) if np.any(horiz) else True
    th = np.abs(pts[horiz, 1] * dSS[horiz])
    min_th = float(th.min()) if th.size else np.inf
    lat = (pts[:, 0] != 0) & (pts[:, 1] != 0)
    ratio = ds[lat] / pts[lat, 0]
    min_ratio = float(ratio.min()) if ratio.size else np.inf
    eq = pts[:, 0] == 0
    eq_max = float(np.max(np.abs(ds[eq]))) if np.any(eq) else 0.0
    return OracleReport(pts, dS, dSS, ds, sign_ok, zero_ok, min_th, min_ratio, eq_max)

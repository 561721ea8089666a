"""Profiles of simple symmetric surfaces of revolution.

The metric is ``f(sigma)**2 dtheta**2 + dsigma**2`` with ``sigma`` the signed
geodesic distance to the equator, ``sigma`` in ``[-L/2, L/2]``.  Every profile
is normalized so that ``max f = f(0) = 1``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.special import ellipeinc

from .errors import InvalidParameter, NotSimpleSymmetric

__all__ = [
    "Profile",
    "ValidationReport",
    "make_sphere",
    "make_ellipsoid",
    "make_custom",
    "read_profile_csv",
    "make_profile",
    "validate",
]

FEval = Callable[[np.ndarray], tuple]


@dataclass(frozen=True, eq=False)
class Profile:
    """Immutable surface-of-revolution profile.

    Parameters
    ----------
    L : float
        Meridian length; the profile lives on ``[-L/2, L/2]``.
    f_eval : callable
        Maps an array of ``sigma`` to ``(f, f', f'')``.
    kind : str
        ``"sphere"``, ``"ellipsoid"`` or ``"custom-samples"``.
    scale : float
        Physical scale removed by the ``max f = 1`` normalization.
    params : dict
        Construction parameters (``{"b": 0.8}`` for ellipsoids).
    f_sq_gap : callable, optional
        Accurate ``f(ref - d)**2 - f(ref)**2`` for ``d >= 0``.  Used near
        turning points where the direct difference cancels.
    inverse : callable, optional
        Exact inverse of ``f`` on ``[0, L/2]``.
    """

    L: float
    f_eval: FEval
    kind: str
    scale: float = 1.0
    params: dict = field(default_factory=dict)
    f_sq_gap: Optional[Callable] = None
    inverse: Optional[Callable] = None

    def __call__(self, sigma):
        return self.f(sigma)

    def f(self, sigma):
        return self.f_eval(np.asarray(sigma, dtype=float))[0]

    def df(self, sigma):
        return self.f_eval(np.asarray(sigma, dtype=float))[1]

    def d2f(self, sigma):
        return self.f_eval(np.asarray(sigma, dtype=float))[2]

    def sq_gap(self, ref, d):
        """``f(ref - d)**2 - f(ref)**2``, free of cancellation when the profile allows it."""
        ref = np.asarray(ref, float)
        d = np.asarray(d, float)
        if self.f_sq_gap is not None:
            return self.f_sq_gap(ref, d)
        return self.f(ref - d) ** 2 - self.f(ref) ** 2

    @property
    def curvature_at_equator(self) -> float:
        """``k = -f''(0)``."""
        return float(-self.d2f(0.0))

    @property
    def label(self) -> str:
        if self.kind == "ellipsoid":
            return f"ellipsoid:b={self.params['b']:g}"
        return self.kind

    def area(self) -> float:
        """Riemannian area ``2 pi int f dsigma``."""
        x, w = np.polynomial.legendre.leggauss(200)
        s = 0.5 * self.L * x
        return float(2 * np.pi * 0.5 * self.L * np.sum(w * self.f(s)))


def make_sphere() -> Profile:
    """Round unit sphere: ``L = pi`` and ``f = cos``."""

    def f_eval(s):
        c = np.cos(s)
        return c, -np.sin(s), -c

    def sq_gap(r, d):
        # cos^2(r - d) - cos^2 r = sin(d) sin(2r - d)
        return np.sin(d) * np.sin(2 * r - d)

    def inverse(v):
        return np.arccos(np.clip(v, -1.0, 1.0))

    return Profile(L=np.pi, f_eval=f_eval, kind="sphere", f_sq_gap=sq_gap, inverse=inverse)


class _EllipsoidMap:
    """Arc length ``sigma(u)`` along the meridian ``(cos u, b sin u)`` and its inverse."""

    def __init__(self, b: float, n_table: int = 2048):
        self.b = b
        self.m = 1.0 - 1.0 / (b * b)
        u = np.linspace(-np.pi / 2, np.pi / 2, n_table + 1)
        self.half = float(self.sigma(np.pi / 2))
        self._guess = PchipInterpolator(self.sigma(u), u)

    def sigma(self, u):
        # int_0^u sqrt(sin^2 + b^2 cos^2) = b E(u | 1 - 1/b^2)
        return self.b * ellipeinc(u, self.m)

    def speed(self, u):
        return np.sqrt(np.sin(u) ** 2 + self.b**2 * np.cos(u) ** 2)

    def u_gap(self, u_ref, d):
        """``u_ref - u(sigma(u_ref) - d)`` computed from the arc-length gap ``d``."""
        x, w = np.polynomial.legendre.leggauss(12)
        du = d / self.speed(u_ref)
        for _ in range(6):
            # arc length over [u_ref - du, u_ref] by Gauss-Legendre
            mid = u_ref - 0.5 * du
            nodes = mid[..., None] + 0.5 * du[..., None] * x
            arc = 0.5 * du * np.sum(w * self.speed(nodes), axis=-1)
            du = du - (arc - d) / self.speed(u_ref - du)
        return du

    def u_of_sigma(self, s):
        s = np.clip(s, -self.half, self.half)
        u = self._guess(s)
        for _ in range(3):
            u = u - (self.sigma(u) - s) / self.speed(u)
        return np.clip(u, -np.pi / 2, np.pi / 2)


def make_ellipsoid(b: float) -> Profile:
    """Ellipsoid of revolution with equatorial radius 1 and polar semi-axis ``b``.

    ``b < 1`` is oblate, ``b > 1`` prolate and ``b = 1`` the round sphere.
    """
    if not np.isfinite(b) or b <= 0:
        raise InvalidParameter(f"ellipsoid semi-axis must be positive, got b={b!r}")
    emap = _EllipsoidMap(float(b))
    b2 = float(b) ** 2

    def f_eval(s):
        # evaluate on |sigma| so the symmetry is exact
        sgn = np.sign(s)
        u = emap.u_of_sigma(np.abs(s))
        sp = emap.speed(u)
        cu, su = np.cos(u), np.sin(u)
        return cu, -sgn * su / sp, -b2 * cu / sp**4

    def sq_gap(r, d):
        r, d = np.broadcast_arrays(r, d)
        ur = emap.u_of_sigma(r)
        small = d < 0.25
        du = np.where(small, 0.0, ur - emap.u_of_sigma(r - d))
        if np.any(small):
            du[small] = emap.u_gap(ur[small], d[small])
        return np.sin(du) * np.sin(2 * ur - du)

    def inverse(v):
        return emap.sigma(np.arccos(np.clip(v, -1.0, 1.0)))

    return Profile(
        L=2.0 * emap.half,
        f_eval=f_eval,
        kind="ellipsoid",
        params={"b": float(b)},
        f_sq_gap=sq_gap,
        inverse=inverse,
    )


def _spline_sq_gap(spline: CubicSpline):
    """``f(r - d)**2 - f(r)**2`` from the local cubic coefficients.

    Differences inside one piece factor out the width ``d`` exactly, so
    there is no cancellation near turning points.
    """
    x, c = spline.x, spline.c
    m = len(x) - 2

    def piece(i, lo, w):
        # f(lo + w) - f(lo) on piece i
        ta = lo - x[i]
        tb = ta + w
        return w * (c[2, i] + c[1, i] * (tb + ta) + c[0, i] * (tb * tb + tb * ta + ta * ta))

    def gap(r, d):
        r, d = np.broadcast_arrays(np.asarray(r, float), np.asarray(d, float))
        a = r - d
        ia = np.clip(np.searchsorted(x, a, "right") - 1, 0, m)
        ib = np.clip(np.searchsorted(x, r, "right") - 1, 0, m)
        same = ia == ib
        nxt = x[np.minimum(ia + 1, m + 1)]
        head = piece(ia, a, np.where(same, d, nxt - a))
        mid = c[3, ib] - c[3, np.minimum(ia + 1, m)]
        tail = piece(ib, x[ib], r - x[ib])
        diff = np.where(same, head, head + np.where(ib > ia + 1, mid, 0.0) + tail)
        return -diff * (spline(np.abs(a)) + spline(np.abs(r)))

    return gap


def make_custom(samples: Sequence[tuple]) -> Profile:
    """Profile interpolated from symmetric ``(sigma, f)`` samples.

    A cubic spline clamped to the pole slopes ``f'(-L/2) = 1`` and
    ``f'(L/2) = -1`` is fitted to the symmetrized samples.  It is even, and
    evaluation uses ``|sigma|`` so the symmetry is exact.  Samples peaking
    away from 1 are rescaled by the homothety ``(sigma, f) -> (sigma, f) / max f``.
    """
    arr = np.asarray(list(samples), dtype=float)
    if arr.size == 0:
        raise InvalidParameter("empty sample list")
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 5:
        raise InvalidParameter("need at least five (sigma, f) pairs")
    s, v = arr[:, 0], arr[:, 1]
    if np.any(np.diff(s) <= 0):
        raise InvalidParameter("sigma must be strictly increasing")
    if np.max(v) <= 0:
        raise InvalidParameter("profile values must be positive in the interior")
    tol = 1e-9 * float(np.max(v))
    if not np.allclose(s, -s[::-1], atol=1e-9 * (s[-1] - s[0])) or np.max(np.abs(v - v[::-1])) > tol:
        raise NotSimpleSymmetric("samples are not symmetric under sigma -> -sigma")
    if abs(v[0]) > tol or abs(v[-1]) > tol:
        raise InvalidParameter("profile must vanish at both endpoints")
    if np.any(v[1:-1] <= 0):
        raise InvalidParameter("profile must be strictly positive in the interior")

    s = 0.5 * (s - s[::-1])
    v = 0.5 * (v + v[::-1])
    v[0] = v[-1] = 0.0
    # the maximum sits at sigma = 0, possibly between samples; the homothety
    # keeps the pole slopes, so the clamped fit commutes with it
    peak = float(CubicSpline(s, v, bc_type=((1, 1.0), (1, -1.0)))(0.0))
    s, v = s / peak, v / peak
    L = float(s[-1] - s[0])
    # symmetric data and symmetric clamping give an even spline
    spline = CubicSpline(s, v, bc_type=((1, 1.0), (1, -1.0)))
    d1, d2 = spline.derivative(1), spline.derivative(2)

    def f_eval(x):
        a = np.abs(x)
        return spline(a), np.sign(x) * d1(a), d2(a)

    prof = Profile(
        L=L,
        f_eval=f_eval,
        kind="custom-samples",
        scale=peak,
        params={"n_samples": len(arr)},
        f_sq_gap=_spline_sq_gap(spline),
    )

    grid = np.linspace(0.0, L / 2, 4001)[1:]
    slope = d1(grid)
    if np.any(slope >= 0) or d2(0.0) >= 0:
        raise NotSimpleSymmetric("interpolated profile is not monotone on [0, L/2] with f''(0) < 0")
    rep = validate(prof)
    if not rep.passed:
        raise NotSimpleSymmetric(f"profile failed validation: {rep.failures()}")
    return prof


def read_profile_csv(path) -> Profile:
    """Read a ``sigma,f`` CSV file and build a custom profile."""
    rows = []
    try:
        fh = open(Path(path), newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidParameter(f"cannot read profile {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["sigma", "f"]:
            raise InvalidParameter(f"{path}: expected header 'sigma,f'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError) as exc:
                raise InvalidParameter(f"{path}:{lineno}: bad row {row!r}") from exc
    return make_custom(rows)


def make_profile(spec: str) -> Profile:
    """Build a profile from a short string: ``sphere``, ``ellipsoid:b=0.8`` or ``custom:path=f.csv``."""
    kind, _, rest = spec.partition(":")
    opts = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise InvalidParameter(f"bad surface option {item!r} in {spec!r}")
        opts[key.strip()] = val.strip()
    kind = kind.strip()
    if kind == "sphere" and not opts:
        return make_sphere()
    if kind == "ellipsoid" and set(opts) == {"b"}:
        try:
            b = float(opts["b"])
        except ValueError as exc:
            raise InvalidParameter(f"bad ellipsoid parameter in {spec!r}") from exc
        return make_ellipsoid(b)
    if kind == "custom" and set(opts) == {"path"}:
        return read_profile_csv(opts["path"])
    raise InvalidParameter(f"unknown surface {spec!r}")


@dataclass
class ValidationReport:
    positivity: bool
    symmetry: bool
    unique_max: bool
    nondegenerate: bool
    pole_slopes: bool
    f2_at_0: float
    max_asymmetry: float
    pole_slope_error: float

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def checks(self) -> dict:
        return {
            "positivity": self.positivity,
            "symmetry": self.symmetry,
            "unique_max": self.unique_max,
            "nondegenerate": self.nondegenerate,
            "pole_slopes": self.pole_slopes,
        }

    def failures(self) -> list:
        return [k for k, ok in self.checks().items() if not ok]


def validate(profile: Profile, n: int = 2001) -> ValidationReport:
    """Check the simple-symmetric invariants of a profile on a dense grid."""
    h = profile.L / 2
    s = np.linspace(-h, h, n)
    f, df, _ = profile.f_eval(s)
    f_neg = profile.f(-s)
    interior = f[1:-1]
    positivity = bool(np.all(interior > 0) and abs(f[0]) < 1e-9 and abs(f[-1]) < 1e-9)
    asym = float(np.max(np.abs(f - f_neg)))
    symmetry = asym <= 1e-9
    half = s > 0
    f2 = float(profile.d2f(0.0))
    unique_max = bool(
        abs(profile.f(0.0) - 1.0) < 1e-9
        and abs(profile.df(0.0)) < 1e-9
        and np.all(df[half] < 0)
        and np.all(df[s < 0] > 0)
    )
    slope_err = float(max(abs(profile.df(-h) - 1.0), abs(profile.df(h) + 1.0)))
    return ValidationReport(
        positivity=positivity,
        symmetry=symmetry,
        unique_max=unique_max,
        nondegenerate=f2 < 0,
        pole_slopes=slope_err <= 1e-6,
        f2_at_0=f2,
        max_asymmetry=asym,
        pole_slope_error=slope_err,
    )

"""Spectral projector kernels and the scaling experiments built on them.

The sharp projector ``P = 1_{[lambda - delta, lambda + delta]}(sqrt(-Delta))``
has diagonal kernel ``sum |phi_j(x)|^2`` over the window, which is the
square of its ``L^2 -> L^infty`` norm at ``x``.  The smoothed projector
replaces the indicator by ``f(q) = (dmu_lambda * rho_delta)(q)`` evaluated
at the joint-spectrum points ``q = (G(lambda_j, k_j), k_j)``.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .action import gamma_curve
from .clairaut import clairaut_table
from .errors import InvalidParameter, TruncatedTable
from .spectrum import SpectralTable
from .surface import Profile

__all__ = [
    "sharp_kernel",
    "gaussian_bump",
    "smoothing_function",
    "smoothed_kernel",
    "ProjectorScan",
    "norm_scan",
    "pole_growth_scan",
    "eigenfunction_sup_scan",
    "norm_identity_check",
]


def _check_window(table: SpectralTable, lam: float, delta: float):
    if delta <= 0:
        raise InvalidParameter("delta must be positive")
    if lam + delta > table.lambda_max * (1 + 1e-12):
        raise TruncatedTable(f"window [{lam - delta:g}, {lam + delta:g}] exceeds lambda_max={table.lambda_max:g}")


def sharp_kernel(table: SpectralTable, lam: float, delta: float, sigma):
    """Diagonal of the sharp projector at ``(theta, sigma)``, any ``theta``.

    Riemannian density: ``int sharp_kernel dA`` counts the eigenvalues in
    ``[lam - delta, lam + delta]``.
    """
    _check_window(table, lam, delta)
    idx = table.window(lam - delta, lam + delta)
    if idx.size == 0:
        return np.zeros_like(np.asarray(sigma, dtype=float)) if np.ndim(sigma) else 0.0
    vals = table.values(sigma)[idx]
    out = np.tensordot(table.multiplicity[idx].astype(float), vals**2, axes=1)
    return float(out) if np.ndim(out) == 0 else out


def gaussian_bump(z, width: float = 1.0):
    """Normalized Gaussian ``rho(z) = exp(-|z|^2 / (2 w^2)) / (2 pi w^2)`` on the plane."""
    z = np.asarray(z, dtype=float)
    r2 = np.sum(z * z, axis=-1)
    return np.exp(-0.5 * r2 / width**2) / (2 * np.pi * width**2)


@dataclass
class _CurveSamples:
    h: np.ndarray
    ds: np.ndarray


_CURVES: "weakref.WeakKeyDictionary[Profile, dict]" = weakref.WeakKeyDictionary()


def _curve_samples(profile: Profile, n: int) -> _CurveSamples:
    store = _CURVES.setdefault(profile, {})
    if n not in store:
        c = gamma_curve(profile, n=n)
        # superficial measure: arc length times |det(h', h)|
        w = np.abs(c.tangent[:, 0] * c.h[:, 1] - c.tangent[:, 1] * c.h[:, 0])
        store[n] = _CurveSamples(h=c.h, ds=w * c.total_length / n)
    return store[n]


def smoothing_function(profile: Profile, q, lam: float, delta: float, rho_width: float = 1.0, n_curve: Optional[int] = None):
    """``f(q) = int_gamma rho_delta(q - lam h(u)) lam w(u) du`` at points ``q`` (shape ``(..., 2)``).

    ``rho_delta = delta^{-1} rho(./delta)`` with ``rho`` the normalized
    Gaussian of width ``rho_width``; ``w`` is the weight of the curve measure.
    """
    q = np.asarray(q, dtype=float)
    if n_curve is None:
        # resolve the bump on the dilated curve: spacing below width*delta/4
        n_curve = int(2 ** math.ceil(math.log2(max(512, 4 * 8 * lam / (rho_width * delta)))))
    cs = _curve_samples(profile, n_curve)
    pts = lam * cs.h
    flat = q.reshape(-1, 2)
    out = np.empty(flat.shape[0])
    chunk = max(1, 2_000_000 // pts.shape[0])
    for i in range(0, flat.shape[0], chunk):
        diff = (flat[i : i + chunk, None, :] - pts[None, :, :]) / delta
        out[i : i + chunk] = lam / delta * gaussian_bump(diff, rho_width) @ cs.ds
    return out.reshape(q.shape[:-1])


def _joint_points(table: SpectralTable, profile: Profile, idx: np.ndarray) -> np.ndarray:
    lam, k = table.lam[idx], table.k[idx].astype(float)
    safe = np.where(lam > 0, lam, 1.0)
    I = np.clip(np.abs(k) / safe, 0.0, 1.0)
    q1 = np.where(lam > 0, lam * clairaut_table(profile).g(I), 0.0)
    return np.stack([q1, k], axis=-1)


def smoothed_kernel(table: SpectralTable, profile: Profile, lam: float, delta: float, sigma, rho_width: float = 1.0) -> dict:
    """Diagonal of the smoothed projector ``f(Q1, Q2)`` at ``sigma``.

    Returns a dict with the kernel (Riemannian density), the value
    normalized by ``lam * delta``, the coordinate-density limit constant
    ``2 (2 pi)^{-2} c_W rho_hat(0, 0)`` and the domination data
    ``c = min f`` over the sharp window.
    """
    _check_window(table, lam, delta)
    # modes whose bump weight can matter: within 12 widths of the shell
    reach = 12 * rho_width * delta + 1.0
    idx = table.window(max(lam - reach, 0.0), min(lam + reach, table.lambda_max))
    q = _joint_points(table, profile, idx)
    fq = smoothing_function(profile, q, lam, delta, rho_width)
    vals = table.values(sigma)[idx] ** 2
    mult = table.multiplicity[idx].astype(float)
    kern = np.tensordot(mult * fq, vals, axes=1)
    in_win = np.abs(table.lam[idx] - lam) <= delta
    sharp = np.tensordot(mult[in_win], vals[in_win], axes=1) if np.any(in_win) else np.zeros_like(kern)
    c = float(fq[in_win].min()) if np.any(in_win) else math.nan
    f_sigma = profile.f(np.asarray(sigma, dtype=float))
    # rho_hat(0, 0) taken as int rho = 1 (non-unitary transform)
    rho_hat0 = 1.0
    limit = 2 * (2 * np.pi) ** -2 * (np.pi * f_sigma) * rho_hat0
    return {
        "kernel": kern,
        "normalized": kern / (lam * delta),
        "normalized_coordinate": kern * f_sigma / (lam * delta),
        "limit_coordinate": limit,
        "sharp": sharp,
        "c": c,
        "dominates": bool(np.all(kern >= c * sharp * (1 - 1e-12))) if np.isfinite(c) else True,
    }


@dataclass
class ProjectorScan:
    """Results of :func:`norm_scan`; ``rows`` hold one dict per ``(lambda, kappa)``."""

    profile: Profile
    K_eps: float
    lambda_grid: np.ndarray
    kappa_grid: np.ndarray
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    slopes_compensated: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def ratios(self) -> np.ndarray:
        return np.array([r["ratio"] for r in self.rows])

    def as_dict(self) -> dict:
        return {
            "K_eps": self.K_eps,
            "rows": self.rows,
            "slopes": {str(k): v for k, v in self.slopes.items()},
            "slopes_compensated": {str(k): v for k, v in self.slopes_compensated.items()},
            "flags": self.flags,
        }


def _K_mask(table: SpectralTable, eps: float) -> np.ndarray:
    L = table.profile.L if table.profile is not None else table.sigma[-1] - table.sigma[0]
    if not 0 < eps < 0.5 * L:
        raise InvalidParameter("K_eps must lie in (0, L/2)")
    return np.abs(table.sigma) <= 0.5 * L - eps + 1e-12


def norm_scan(table: SpectralTable, K_eps: float, lambda_grid: Sequence[float], kappa_grid: Sequence[float]) -> ProjectorScan:
    """``R(lambda, delta) = sup_K P(x, x) / (lambda delta)`` with ``delta = lambda^{-kappa}``.

    ``delta`` is clamped at ``1/lambda`` (clamped rows are flagged).  For
    each ``kappa`` the least-squares slope of ``log sup_K P`` against
    ``log lambda`` is stored in ``slopes``; ``slopes_compensated`` uses
    ``log(sup_K P / delta)``, whose expected value is 1 when
    ``sup P ~ lambda delta``.
    """
    lam_grid = np.asarray(lambda_grid, dtype=float)
    kap_grid = np.asarray(kappa_grid, dtype=float)
    mask = _K_mask(table, K_eps)
    sig = table.sigma[mask]
    scan = ProjectorScan(table.profile, float(K_eps), lam_grid, kap_grid)
    for kappa in kap_grid:
        sups, deltas = [], []
        for lam in lam_grid:
            delta = lam ** (-kappa)
            clamped = delta < 1.0 / lam
            delta = max(delta, 1.0 / lam)
            kern = np.atleast_1d(sharp_kernel(table, lam, delta, sig))
            j = int(np.argmax(kern))
            sup = float(kern[j])
            scan.rows.append({
                "lambda": float(lam), "kappa": float(kappa), "delta": float(delta), "sup_kernel": sup,
                "ratio": sup / (lam * delta), "argmax_sigma": float(sig[j]), "clamped": bool(clamped),
            })
            sups.append(sup)
            deltas.append(delta)
        sups, deltas = np.array(sups), np.array(deltas)
        if lam_grid.size >= 2 and np.all(sups > 0):
            scan.slopes[float(kappa)] = float(np.polyfit(np.log(lam_grid), np.log(sups), 1)[0])
            scan.slopes_compensated[float(kappa)] = float(np.polyfit(np.log(lam_grid), np.log(sups / deltas), 1)[0])
    scan.flags["sphere_degenerate"] = bool(table.profile is not None and table.profile.kind == "sphere")
    return scan


def _dyadic_windows(lo: float, hi: float):
    edges = [lo]
    while edges[-1] * 2 < hi:
        edges.append(edges[-1] * 2)
    edges.append(hi)
    return list(zip(edges[:-1], edges[1:]))


def _growth_fit(windows, values):
    centers = np.array([math.sqrt(a * b) for a, b in windows])
    v = np.asarray(values, dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(centers[ok]), np.log(v[ok]), 1)[0])


def pole_growth_scan(table: SpectralTable, lambda_grid: Optional[Sequence[float]] = None) -> dict:
    """Largest ``|phi_j(pole)|^2`` per window and its growth exponent in ``lambda``.

    ``lambda_grid`` gives the window edges (default dyadic from 8 up to
    ``lambda_max``).  ``window_ok`` tells whether some mode in the window
    has ``|phi(pole)|^2 >= lambda_j / (8 pi)``.
    """
    if lambda_grid is None:
        windows = _dyadic_windows(8.0, table.lambda_max)
    else:
        edges = np.asarray(lambda_grid, dtype=float)
        windows = list(zip(edges[:-1], edges[1:]))
    pole2 = table.phi[:, 0] ** 2
    out = {"windows": [], "max_pole_value": [], "argmax_lambda": [], "window_ok": []}
    for a, b in windows:
        idx = table.window(a, b)
        if idx.size == 0:
            continue
        j = idx[int(np.argmax(pole2[idx]))]
        out["windows"].append([float(a), float(b)])
        out["max_pole_value"].append(float(pole2[j]))
        out["argmax_lambda"].append(float(table.lam[j]))
        out["window_ok"].append(bool(np.any(pole2[idx] >= table.lam[idx] / (8 * np.pi))))
    out["exponent"] = _growth_fit(out["windows"], out["max_pole_value"])
    nz = table.k != 0
    out["max_nonzero_k_pole"] = float(np.max(np.abs(table.phi[nz, 0]))) if np.any(nz) else 0.0
    return out


def eigenfunction_sup_scan(table: SpectralTable, K_eps: float, lambda_grid: Optional[Sequence[float]] = None) -> dict:
    """``sup_K |phi_j|`` per mode, window maxima and the fitted exponent in ``lambda``.

    Also reports the largest deviation of ``2 pi int |Phi|^2 f`` from 1,
    computed from the stored samples.
    """
    mask = _K_mask(table, K_eps)
    sup = np.max(np.abs(table.phi[:, mask]), axis=1)
    if lambda_grid is None:
        windows = _dyadic_windows(8.0, table.lambda_max)
    else:
        edges = np.asarray(lambda_grid, dtype=float)
        windows = list(zip(edges[:-1], edges[1:]))
    wmax, wins, arg = [], [], []
    for a, b in windows:
        idx = table.window(a, b)
        if idx.size == 0:
            continue
        j = idx[int(np.argmax(sup[idx]))]
        wins.append([float(a), float(b)])
        wmax.append(float(sup[j]))
        arg.append({"k": int(table.k[j]), "l": int(table.l[j]), "lambda": float(table.lam[j])})
    norm_dev = math.nan
    if table.profile is not None:
        norm_dev = float(np.max(np.abs(_l2_norms(table) - 1.0)))
    return {
        "per_mode_sup": sup,
        "windows": wins,
        "window_max": wmax,
        "argmax": arg,
        "exponent": _growth_fit(wins, wmax),
        "max_norm_deviation": norm_dev,
    }


def _l2_norms(table: SpectralTable) -> np.ndarray:
    # Gauss-Legendre on each stored cell through the cubic interpolant
    x, w = np.polynomial.legendre.leggauss(6)
    s = table.sigma
    mid, half = 0.5 * (s[1:] + s[:-1]), 0.5 * np.diff(s)
    nodes = (mid[:, None] + half[:, None] * x).ravel()
    weights = (half[:, None] * w).ravel() * table.profile.f(nodes)
    vals = table.values(nodes)
    return 2 * np.pi * (vals**2) @ weights


def norm_identity_check(table: SpectralTable, lam: float, delta: float, K_eps: float, n_theta: int = 16) -> dict:
    """Compare ``sup_K`` of the diagonal kernel with a direct variational maximization.

    For every sample ``x = (theta, sigma)`` of ``K`` the evaluation vector
    ``v_j = phi_j(x)`` of the complex eigenbasis in the window is formed
    and ``max_{|c| = 1} |sum c_j phi_j(x)|^2`` is found as the top
    eigenvalue of ``v v^*`` (Hermitian eigensolver), then maximized over
    ``x``.  Both sides are squared norms.
    """
    _check_window(table, lam, delta)
    idx = table.window(lam - delta, lam + delta)
    rows = []
    for j in idx:
        rows.append((int(table.k[j]), j))
        if table.k[j] != 0:
            rows.append((-int(table.k[j]), j))
    if len(rows) > 30:
        raise InvalidParameter(f"window holds {len(rows)} modes; the brute-force check is limited to 30")
    mask = _K_mask(table, K_eps)
    sig = table.sigma[mask]
    kern = np.atleast_1d(sharp_kernel(table, lam, delta, sig)) if idx.size else np.zeros(sig.size)
    formula = float(kern.max())
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    brute = 0.0
    if rows:
        ks = np.array([r[0] for r in rows])
        Phi = table.phi[[r[1] for r in rows]][:, mask]
        for th in thetas:
            V = Phi * np.exp(1j * ks * th)[:, None]  # (modes, points)
            for col in V.T:
                top = np.linalg.eigvalsh(np.outer(col, col.conj()))[-1]
                brute = max(brute, float(top))
    return {
        "n_modes": len(rows),
        "formula": formula,
        "brute_force": brute,
        "abs_diff": abs(formula - brute),
        "rel_diff": abs(formula - brute) / formula if formula > 0 else abs(brute),
    }

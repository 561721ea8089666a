"""Laplace-Beltrami spectrum by separation of variables.

Eigenfunctions are ``e^{ik theta} Phi_{k,l}(sigma)`` where ``Phi`` solves

    -(1/f) (f Phi')' + (k^2 / f^2) Phi = lambda^2 Phi

on ``(-L/2, L/2)``.  The radial problem is discretized by cell-centred
finite volumes in flux form: faces at the poles carry ``f = 0`` so no
boundary condition has to be imposed there, and the pole behaviour of
every ``k`` (including the ``k = 0`` case) comes out of the scheme.  The
symmetrized matrix is tridiagonal and is diagonalized by the in-repo
Sturm bisection / inverse iteration solver.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .clairaut import clairaut_table
from .constants import LAMBDA_MAX_CAP
from .errors import InvalidParameter, ResolutionFailure, TruncatedTable, ValidationError
from .surface import Profile
from .tridiag import eigh_tridiag

__all__ = [
    "EigenMode",
    "SpectralTable",
    "potential",
    "radial_operator",
    "solve_modes",
    "spectrum_table",
    "save_table",
    "load_table",
    "weyl_pointwise",
    "LatticeReport",
    "joint_lattice_check",
]

# decay budget (in e-folds) used to drop cells deep in the classically forbidden zone
_FORBIDDEN_EFOLDS = 45.0


def potential(profile: Profile, k: int, sigma):
    """Liouville potential ``V_k = k^2/f^2 + f''/(2f) - f'^2/(4 f^2)``.

    ``u = f^{1/2} Phi`` turns the radial equation into ``-u'' + V_k u = lambda^2 u``.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(np.abs(sigma) >= 0.5 * profile.L):
        raise InvalidParameter("potential is singular at the poles")
    f, df, d2f = profile.f_eval(sigma)
    v = k * k / f**2 + d2f / (2 * f) - df**2 / (4 * f**2)
    return float(v) if v.ndim == 0 else v


@dataclass
class EigenMode:
    """One separated eigenfunction ``e^{ik theta} Phi(sigma)``.

    ``phi`` is sampled at ``sigma`` and normalized so that
    ``2 pi int |Phi|^2 f dsigma = 1``; ``pole`` holds ``Phi(-L/2)``.
    """

    k: int
    l: int
    lam: float
    sigma: np.ndarray
    phi: np.ndarray
    h: float
    pole: float = 0.0


@dataclass
class _Radial:
    d: np.ndarray
    e: np.ndarray
    fc: np.ndarray
    centers: np.ndarray
    active: slice
    h: float


def radial_operator(profile: Profile, k: int, n_grid: int, lambda_max: Optional[float] = None) -> _Radial:
    """Symmetrized finite-volume matrix for angular mode ``k``.

    With ``lambda_max`` given, cells where the eigenfunctions below
    ``lambda_max`` are smaller than ``exp(-45)`` are removed.
    """
    n = int(n_grid)
    h = profile.L / n
    centers = -0.5 * profile.L + (np.arange(n) + 0.5) * h
    faces = -0.5 * profile.L + np.arange(1, n) * h
    fc = profile.f(centers)
    ff = profile.f(faces)
    i0, i1 = 0, n
    if lambda_max is not None and k != 0:
        excess = np.sqrt(np.maximum(k * k / fc**2 - lambda_max**2, 0.0))
        mid = n // 2
        right = np.cumsum(excess[mid:]) * h
        left = np.cumsum(excess[:mid][::-1]) * h
        i1 = mid + int(np.searchsorted(right, _FORBIDDEN_EFOLDS)) + 1
        i0 = mid - int(np.searchsorted(left, _FORBIDDEN_EFOLDS)) - 1
        i0, i1 = max(i0, 0), min(i1, n)
    fl = np.concatenate(([0.0], ff))  # left face of each cell
    fr = np.concatenate((ff, [0.0]))  # right face
    d = (fl + fr) / (h * h * fc) + k * k / fc**2
    e = -ff / (h * h * np.sqrt(fc[:-1] * fc[1:]))
    return _Radial(d=d[i0:i1], e=e[i0 : i1 - 1], fc=fc, centers=centers, active=slice(i0, i1), h=h)


def _sign_changes(v: np.ndarray) -> int:
    big = v[np.abs(v) > 1e-8 * np.max(np.abs(v))]
    return int(np.count_nonzero(np.signbit(big[1:]) != np.signbit(big[:-1])))


def solve_modes(
    profile: Profile,
    k: int,
    lambda_max: float,
    n_grid: int = 4000,
    min_points_per_wavelength: float = 12.0,
) -> List[EigenMode]:
    """All radial modes of angular mode ``k`` with ``lambda <= lambda_max``.

    Parameters
    ----------
    profile : Profile
    k : int
        Angular mode; ``Phi_{-k,l} = Phi_{k,l}``.
    lambda_max : float
    n_grid : int
        Number of finite-volume cells on the meridian (at least 500).
    min_points_per_wavelength : float
        Resolution guard at ``lambda_max``.

    Returns
    -------
    list of EigenMode
        Sorted by ``lambda``; ``l`` counts from 0.

    Raises
    ------
    ResolutionFailure
        The grid resolves ``lambda_max`` with fewer points per wavelength
        than requested, or the Sturm oscillation audit fails.
    """
    return _solve(profile, k, lambda_max, n_grid, min_points_per_wavelength)[0]


def _solve(profile, k, lambda_max, n_grid, min_points_per_wavelength=12.0):
    # modes plus the largest off-diagonal entry of the eigenvector Gram matrix
    if n_grid < 500:
        raise InvalidParameter("n_grid must be at least 500")
    if not lambda_max > 0:
        raise InvalidParameter("lambda_max must be positive")
    k = abs(int(k))
    h = profile.L / n_grid
    ppw = 2 * math.pi / (lambda_max * h)
    if ppw < min_points_per_wavelength:
        need = int(math.ceil(min_points_per_wavelength * lambda_max * profile.L / (2 * math.pi)))
        raise ResolutionFailure(f"n_grid={n_grid} gives {ppw:.1f} points per wavelength; use n_grid >= {need}")
    op = radial_operator(profile, k, n_grid, lambda_max)
    w, U = eigh_tridiag(op.d, op.e, lambda_max**2 * (1 + 1e-14))
    fa = op.fc[op.active]
    gram = float(np.max(np.abs(U @ U.T - np.eye(len(w))))) if len(w) else 0.0
    modes = []
    for l, (w2, u) in enumerate(zip(w, U)):
        if _sign_changes(u) != l:
            raise ResolutionFailure(f"oscillation audit failed for k={k}, l={l}; refine n_grid")
        phi = np.zeros(n_grid)
        phi[op.active] = u / np.sqrt(2 * np.pi * fa * h)
        # even extrapolation for k = 0; continuity of e^{ik theta} Phi forces 0 otherwise
        pole = (9 * phi[0] - phi[1]) / 8 if k == 0 else 0.0
        modes.append(EigenMode(k=k, l=l, lam=float(np.sqrt(max(w2, 0.0))), sigma=op.centers, phi=phi, h=h, pole=float(pole)))
    return modes, gram


@dataclass
class SpectralTable:
    """All separated modes with ``lambda <= lambda_max`` (``k >= 0`` stored).

    ``phi[j]`` samples ``Phi_{k[j], l[j]}`` on ``sigma``, a uniform grid
    including both poles.  Modes with ``k > 0`` stand for the pair ``+-k``.
    """

    profile: Optional[Profile]
    lambda_max: float
    sigma: np.ndarray
    k: np.ndarray
    l: np.ndarray
    lam: np.ndarray
    phi: np.ndarray
    n_grid: int = 0
    info: dict = field(default_factory=dict)

    @property
    def multiplicity(self) -> np.ndarray:
        return np.where(self.k == 0, 1, 2)

    @property
    def count(self) -> int:
        """Number of eigenvalues with multiplicity."""
        return int(np.sum(self.multiplicity))

    def signed_modes(self):
        """``(k, l, lambda)`` for every mode, negative ``k`` included, sorted by ``(lambda, k)``."""
        rows = [(int(k), int(l), float(lam)) for k, l, lam in zip(self.k, self.l, self.lam)]
        rows += [(-k, l, lam) for k, l, lam in rows if k > 0]
        rows.sort(key=lambda r: (r[2], r[0], r[1]))
        return rows

    def values(self, sigma) -> np.ndarray:
        """``Phi`` of every stored mode at ``sigma``, shape ``(n_modes,) + shape(sigma)``."""
        if "_spline" not in self.__dict__:
            self.__dict__["_spline"] = CubicSpline(self.sigma, self.phi, axis=1)
        return self.__dict__["_spline"](np.asarray(sigma, dtype=float))

    def window(self, lo: float, hi: float) -> np.ndarray:
        """Indices of stored modes with ``lo <= lambda <= hi``."""
        return np.nonzero((self.lam >= lo) & (self.lam <= hi))[0]


def _default_store(profile: Profile, lambda_max: float, n_grid: int) -> int:
    return int(min(n_grid, max(1024, math.ceil(24 * lambda_max * profile.L / (2 * math.pi))))) + 1


def _resample(modes: List[EigenMode], sigma_out: np.ndarray, L: float) -> np.ndarray:
    if not modes:
        return np.zeros((0, sigma_out.size))
    s = np.concatenate(([-0.5 * L], modes[0].sigma, [0.5 * L]))
    rows = []
    for m in modes:
        north = (9 * m.phi[-1] - m.phi[-2]) / 8 if m.k == 0 else 0.0
        rows.append(np.concatenate(([m.pole], m.phi, [north])))
    return CubicSpline(s, np.array(rows), axis=1)(sigma_out)


def spectrum_table(
    profile: Profile,
    lambda_max: float,
    n_grid: Optional[int] = None,
    n_store: Optional[int] = None,
    threads: int = 1,
) -> SpectralTable:
    """Solve every angular mode ``0 <= k <= lambda_max``.

    Parameters
    ----------
    profile : Profile
    lambda_max : float
        At most ``LAMBDA_MAX_CAP``.
    n_grid : int, optional
        Finite-volume cells; default keeps ``lambda_max * h <= 0.035``
        (relative eigenvalue error near ``1e-4`` at the top).
    n_store : int, optional
        Size of the stored uniform ``sigma`` grid.
    threads : int
        Worker threads for the per-``k`` solves.
    """
    if lambda_max > LAMBDA_MAX_CAP:
        raise InvalidParameter(f"lambda_max above the desk-scale cap {LAMBDA_MAX_CAP}")
    if not lambda_max > 0:
        raise InvalidParameter("lambda_max must be positive")
    if n_grid is None:
        n_grid = max(2000, int(math.ceil(profile.L * lambda_max / 0.035 / 100.0)) * 100)
    if n_store is None:
        n_store = _default_store(profile, lambda_max, n_grid)
    sigma_out = np.linspace(-0.5 * profile.L, 0.5 * profile.L, int(n_store))
    ks = list(range(int(math.floor(lambda_max)) + 1))

    def job(k):
        modes, gram = _solve(profile, k, lambda_max, n_grid)
        if not modes:
            return modes, np.zeros((0, sigma_out.size)), 0.0, 0.0
        nd = max(abs(2 * np.pi * np.sum(m.phi**2 * profile.f(m.sigma)) * m.h - 1.0) for m in modes)
        return modes, _resample(modes, sigma_out, profile.L), nd, gram

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(job, ks))
    else:
        results = [job(k) for k in ks]
    kk, ll, lam, rows = [], [], [], []
    norm_dev = max(r[2] for r in results)
    gram_dev = max(r[3] for r in results)
    for modes, phi, _, _ in results:
        for m, row in zip(modes, phi):
            kk.append(m.k)
            ll.append(m.l)
            lam.append(m.lam)
            rows.append(row)
    order = np.lexsort((np.array(ll, int), np.array(kk, int), np.array(lam)))
    table = SpectralTable(
        profile=profile,
        lambda_max=float(lambda_max),
        sigma=sigma_out,
        k=np.array(kk, dtype=int)[order],
        l=np.array(ll, dtype=int)[order],
        lam=np.array(lam)[order],
        phi=np.array(rows).reshape(-1, sigma_out.size)[order],
        n_grid=int(n_grid),
    )
    weyl = lambda_max**2 * profile.area() / (4 * np.pi)
    table.info = {"n_grid": int(n_grid), "n_store": int(n_store), "weyl_count": weyl, "count": table.count,
                  "weyl_ratio": table.count / weyl, "max_norm_deviation": norm_dev,
                  "max_gram_offdiag": gram_dev}
    return table


def save_table(table: SpectralTable, directory) -> tuple:
    """Write ``modes.csv`` (all signed modes) and ``profiles.csv`` (``k >= 0``)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    mpath, ppath = directory / "modes.csv", directory / "profiles.csv"
    with open(mpath, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "l", "lambda"])
        for k, l, lam in table.signed_modes():
            w.writerow([k, l, repr(lam)])
    with open(ppath, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "l", "sigma", "phi"])
        for k, l, row in zip(table.k, table.l, table.phi):
            for s, v in zip(table.sigma, row):
                w.writerow([int(k), int(l), repr(float(s)), repr(float(v))])
    return mpath, ppath


def load_table(directory, profile: Optional[Profile] = None) -> SpectralTable:
    """Inverse of :func:`save_table`."""
    directory = Path(directory)
    try:
        modes = np.loadtxt(directory / "modes.csv", delimiter=",", skiprows=1, ndmin=2)
        prof = np.loadtxt(directory / "profiles.csv", delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read spectral table from {directory}: {exc}") from exc
    modes = modes[modes[:, 0] >= 0]
    lam_of = {(int(k), int(l)): lam for k, l, lam in modes}
    keys = sorted(lam_of, key=lambda kl: (lam_of[kl], kl[0], kl[1]))
    sigma = np.unique(prof[:, 2])
    phi = np.empty((len(keys), sigma.size))
    index = {kl: i for i, kl in enumerate(keys)}
    rows = prof[np.lexsort((prof[:, 2], prof[:, 1], prof[:, 0]))]
    for block in np.split(rows, np.nonzero((np.diff(rows[:, 0]) != 0) | (np.diff(rows[:, 1]) != 0))[0] + 1):
        kl = (int(block[0, 0]), int(block[0, 1]))
        if kl not in index or block.shape[0] != sigma.size:
            raise ValidationError(f"profiles.csv does not match modes.csv at (k, l) = {kl}")
        phi[index[kl]] = block[:, 3]
    lam = np.array([lam_of[kl] for kl in keys])
    return SpectralTable(
        profile=profile,
        lambda_max=float(lam.max()) if lam.size else 0.0,
        sigma=sigma,
        k=np.array([kl[0] for kl in keys], dtype=int),
        l=np.array([kl[1] for kl in keys], dtype=int),
        lam=lam,
        phi=phi,
    )


def weyl_pointwise(table: SpectralTable, x, lam: float) -> dict:
    """Pointwise counting function ``N(lambda, x) = sum_{lambda_j <= lambda} |phi_j(x)|^2``.

    ``x = (theta, sigma)``; the value does not depend on ``theta``.  The
    Riemannian leading term is ``lambda^2/(4 pi)``; the coordinate-density
    variant multiplies ``N`` by ``f(sigma)`` and compares it with
    ``c_W(sigma) lambda^2/(2 pi)^2``, ``c_W = pi f(sigma)``.
    """
    if lam > table.lambda_max:
        raise TruncatedTable("lambda beyond the table's lambda_max")
    sigma = float(x[1])
    idx = np.nonzero(table.lam <= lam)[0]
    vals = table.values(sigma)[idx]
    N = float(np.sum(table.multiplicity[idx] * vals**2))
    lead = lam**2 / (4 * np.pi)
    out = {"N": N, "leading": lead, "remainder": N - lead, "ratio": N / lead if lead > 0 else math.nan}
    if table.profile is not None:
        f = float(table.profile.f(sigma))
        cw = np.pi * f
        lead_c = cw * lam**2 / (2 * np.pi) ** 2
        out.update({"c_W": cw, "N_coordinate": N * f, "leading_coordinate": lead_c,
                    "remainder_coordinate": N * f - lead_c})
    return out


@dataclass
class LatticeReport:
    k: np.ndarray
    lam: np.ndarray
    q1: np.ndarray
    distance: np.ndarray
    windows: list
    window_max: np.ndarray
    decay_exponent: float

    def as_dict(self) -> dict:
        return {
            "n_modes": int(self.k.size),
            "windows": [list(map(float, w)) for w in self.windows],
            "window_max": [float(v) for v in self.window_max],
            "decay_exponent": float(self.decay_exponent),
        }


def joint_lattice_check(table: SpectralTable, profile: Optional[Profile] = None, lambda_min: float = 1.0) -> LatticeReport:
    """Distance of ``q1 = G(lambda_{k,l}, k)`` to ``Z + 1/2`` per mode.

    Modes with ``|k| >= lambda`` lie outside the cone and are skipped.
    Maxima are taken over dyadic windows ``[2^j, 2^{j+1})`` intersected
    with ``[lambda_min, lambda_max]``.
    """
    profile = profile or table.profile
    if profile is None:
        raise InvalidParameter("a profile is needed to evaluate the action")
    keep = (table.lam > 0) & (np.abs(table.k) < table.lam) & (table.lam >= lambda_min)
    k, lam = table.k[keep], table.lam[keep]
    q1 = lam * clairaut_table(profile).g(np.abs(k) / lam)
    dist = np.abs(q1 - (np.floor(q1) + 0.5))
    windows, wmax = [], []
    j = int(math.floor(math.log2(lambda_min)))
    while 2.0**j <= table.lambda_max:
        lo, hi = max(2.0**j, lambda_min), min(2.0 ** (j + 1), table.lambda_max)
        sel = (lam >= lo) & (lam < hi) if hi < table.lambda_max else (lam >= lo) & (lam <= hi)
        if np.any(sel):
            windows.append((lo, hi))
            wmax.append(float(dist[sel].max()))
        j += 1
    wmax = np.array(wmax)
    if len(windows) >= 2 and np.all(wmax > 0):
        centers = np.array([math.sqrt(a * b) for a, b in windows])
        slope = float(np.polyfit(np.log(centers), np.log(wmax), 1)[0])
    else:
        slope = math.nan
    return LatticeReport(k=k, lam=lam, q1=q1, distance=dist, windows=windows, window_max=wmax, decay_exponent=slope)

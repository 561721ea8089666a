import math

import numpy as np
import pytest
from scipy.integrate import simpson

from revspec import sharp_kernel, smoothed_kernel, spectrum_table
from revspec.action import gamma_curve
from revspec.errors import InvalidParameter, TruncatedTable
from revspec.projector import (
    eigenfunction_sup_scan,
    gaussian_bump,
    norm_identity_check,
    norm_scan,
    pole_growth_scan,
    smoothing_function,
)


@pytest.fixture(scope="module")
def sph_table(sphere):
    return spectrum_table(sphere, 16.0)


@pytest.fixture(scope="module")
def ell_table(ell08):
    return spectrum_table(ell08, 16.0)


def _integrate(table, kern):
    # int K dA with dA = f dsigma dtheta
    return 2 * np.pi * simpson(kern * table.profile.f(table.sigma), x=table.sigma)


@pytest.mark.parametrize("lam,delta", [(6.0, 1.0), (10.0, 0.5), (12.0, 2.5)])
def test_trace_counts_window(ell_table, lam, delta):
    kern = sharp_kernel(ell_table, lam, delta, ell_table.sigma)
    idx = ell_table.window(lam - delta, lam + delta)
    count = ell_table.multiplicity[idx].sum()
    assert count > 0
    assert _integrate(ell_table, kern) == pytest.approx(count, rel=1e-4)


def test_sphere_kernel_is_constant(sph_table):
    # addition theorem: sum over a degree-n shell is (2n+1)/(4 pi)
    lam, delta = 9.0, 1.2
    n = np.arange(0, 40)
    ev = np.sqrt(n * (n + 1.0))
    expect = np.sum((2 * n + 1)[np.abs(ev - lam) <= delta]) / (4 * np.pi)
    sig = np.linspace(-1.4, 1.4, 9)
    kern = sharp_kernel(sph_table, lam, delta, sig)
    np.testing.assert_allclose(kern, expect, rtol=2e-4)


def test_kernel_monotone_in_delta(ell_table):
    sig = ell_table.sigma[::7]
    prev = None
    for delta in (0.2, 0.5, 1.0, 2.0):
        k = sharp_kernel(ell_table, 10.0, delta, sig)
        assert np.all(k >= 0)
        if prev is not None:
            assert np.all(k >= prev - 1e-12)
        prev = k


def test_empty_window_is_zero(sph_table):
    # no sphere eigenvalue in (2.5, 3.4)
    assert sharp_kernel(sph_table, 2.95, 0.4, 0.3) == 0.0


def test_truncated_window_raises(ell_table):
    with pytest.raises(TruncatedTable):
        sharp_kernel(ell_table, 15.5, 1.0, 0.0)
    with pytest.raises(InvalidParameter):
        sharp_kernel(ell_table, 5.0, 0.0, 0.0)


def test_gaussian_bump_normalized():
    x = np.linspace(-12, 12, 601)
    X, Y = np.meshgrid(x, x, indexing="ij")
    z = np.stack([X, Y], axis=-1)
    for w in (0.7, 1.0, 1.5):
        total = simpson(simpson(gaussian_bump(z, w), x=x), x=x)
        assert total == pytest.approx(1.0, rel=1e-8)


@pytest.mark.parametrize("profile_name", ["sphere", "ell08"])
def test_smoothing_function_mass(request, profile_name):
    # rho_delta = rho(./delta)/delta on the plane, so int f dq = lam * delta * (weighted length)
    prof = request.getfixturevalue(profile_name)
    lam, delta = 4.0, 0.5
    c = gamma_curve(prof, n=4096)
    wlen = np.sum(np.abs(c.tangent[:, 0] * c.h[:, 1] - c.tangent[:, 1] * c.h[:, 0])) * c.total_length / 4096
    lo = lam * c.h.min(axis=0) - 5 * delta
    hi = lam * c.h.max(axis=0) + 5 * delta
    x = np.linspace(lo[0], hi[0], 241)
    y = np.linspace(lo[1], hi[1], 241)
    X, Y = np.meshgrid(x, y, indexing="ij")
    fq = smoothing_function(prof, np.stack([X, Y], axis=-1), lam, delta)
    total = simpson(simpson(fq, x=y), x=x)
    assert total == pytest.approx(lam * delta * wlen, rel=1e-5)


def test_smoothing_function_concentrates_on_curve(ell08):
    lam, delta = 8.0, 0.5
    c = gamma_curve(ell08, n=256)
    on = smoothing_function(ell08, lam * c.h[40], lam, delta)
    off = smoothing_function(ell08, lam * c.h[40] + np.array([6 * delta, 0.0]), lam, delta)
    assert on > 0 and off < 1e-6 * on


def test_smoothed_dominates_sharp(ell_table, ell08):
    sig = ell_table.sigma[::5]
    out = smoothed_kernel(ell_table, ell08, 10.0, 1.0, sig)
    assert out["dominates"]
    assert out["c"] > 0
    assert np.all(out["kernel"] >= out["c"] * out["sharp"] * (1 - 1e-12))
    np.testing.assert_allclose(out["sharp"], sharp_kernel(ell_table, 10.0, 1.0, sig), rtol=1e-12)


def test_smoothed_limit_constant(ell08, ell_table):
    out = smoothed_kernel(ell_table, ell08, 10.0, 1.0, 0.0)
    # 2 (2 pi)^-2 * pi f at the equator
    assert out["limit_coordinate"] == pytest.approx(1 / (2 * np.pi), rel=1e-12)
    assert out["normalized_coordinate"] == pytest.approx(out["kernel"] / 10.0, rel=1e-12)


def test_norm_identity(ell_table):
    r = norm_identity_check(ell_table, 6.0, 0.6, 0.2)
    assert r["n_modes"] > 0
    assert r["abs_diff"] <= 1e-8 * max(1.0, r["formula"])


def test_norm_identity_refuses_large_window(ell_table):
    with pytest.raises(InvalidParameter):
        norm_identity_check(ell_table, 12.0, 3.0, 0.2)


def test_norm_scan_clamps_and_slopes(ell_table):
    scan = norm_scan(ell_table, 0.3, [6.0, 9.0, 13.0], [0.0, 0.5, 1.5])
    assert len(scan.rows) == 9
    for r in scan.rows:
        assert r["delta"] >= 1.0 / r["lambda"] - 1e-15
        assert r["clamped"] == (r["kappa"] > 1.0)
        assert r["ratio"] == pytest.approx(r["sup_kernel"] / (r["lambda"] * r["delta"]))
    assert set(scan.slopes) == {0.0, 0.5, 1.5}
    assert not scan.flags["sphere_degenerate"]
    with pytest.raises(InvalidParameter):
        norm_scan(ell_table, 5.0, [6.0], [0.5])


def test_pole_growth_sphere(sph_table):
    out = pole_growth_scan(sph_table, [2.0, 4.0, 8.0, 16.0])
    assert all(out["window_ok"])
    for (a, b), v in zip(out["windows"], out["max_pole_value"]):
        n = np.arange(0, 40)
        ev = np.sqrt(n * (n + 1.0))
        top = n[(ev >= a) & (ev <= b)].max()
        assert v == pytest.approx((2 * top + 1) / (4 * np.pi), rel=2e-4)
    assert out["exponent"] == pytest.approx(1.0, abs=0.2)
    assert out["max_nonzero_k_pole"] == 0.0


def test_eigenfunction_sup_scan(ell_table):
    out = eigenfunction_sup_scan(ell_table, 0.3, [2.0, 4.0, 8.0, 16.0])
    assert len(out["per_mode_sup"]) == ell_table.lam.size
    assert np.all(np.asarray(out["per_mode_sup"]) > 0)
    assert out["max_norm_deviation"] < 1e-3
    assert len(out["windows"]) == 3
    assert math.isfinite(out["exponent"])
    assert eigenfunction_sup_scan(ell_table, 0.3)["windows"] == [[8.0, 16.0]]

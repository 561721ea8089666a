import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revspec import big_G, convexity_check, gamma_curve, little_g, make_ellipsoid, omega
from revspec.action import g_prime_check, n_sigma_curve, q1_symbol, symbol_derivative_oracles
from revspec.clairaut import clairaut_table


def test_sphere_g_is_one(sphere):
    I = np.linspace(0, 1, 11)
    assert np.max(np.abs(little_g(sphere, I) - 1.0)) <= 1e-12


@pytest.mark.parametrize("I", [0.0, 0.2, 0.55, 0.9, 0.999])
def test_g_against_mpmath(ell08, oracle08, I):
    if I == 0.0:
        assert float(little_g(ell08, 0.0)) == pytest.approx(ell08.L / np.pi, rel=1e-14)
    else:
        assert float(little_g(ell08, I)) == pytest.approx(oracle08.g(I), rel=1e-12)


def test_g_at_equator_is_one(ell08, ell12):
    for prof in (ell08, ell12):
        assert float(little_g(prof, 1.0)) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(-0.99, 0.99), st.floats(0.01, 100.0))
def test_G_homogeneous(p1, ratio, s):
    prof = make_ellipsoid(0.8)
    p2 = ratio * p1
    assert float(big_G(prof, s * p1, s * p2)) == pytest.approx(s * float(big_G(prof, p1, p2)), rel=1e-13)


def test_g_prime_is_minus_omega(ell08, ell12):
    grid = np.linspace(0.05, 0.95, 19)
    for prof in (ell08, ell12):
        assert g_prime_check(prof, grid) <= 1e-8


def test_q1_reduces_to_p1_on_sphere(sphere):
    rng = np.random.default_rng(1)
    s = rng.uniform(-1.4, 1.4, 20)
    Th, Sg = rng.normal(size=(2, 20))
    p1 = np.hypot(Th / np.cos(s), Sg)
    assert np.max(np.abs(q1_symbol(sphere, s, Th, Sg) - p1)) <= 1e-12


def test_q1_chebyshev_table_matches_quadrature(ell08):
    rng = np.random.default_rng(2)
    s = rng.uniform(-1.2, 1.2, 10)
    Th, Sg = rng.normal(size=(2, 10))
    a = q1_symbol(ell08, s, Th, Sg)
    b = q1_symbol(ell08, s, Th, Sg, table=False)
    assert np.max(np.abs(a - b) / np.abs(b)) <= 1e-12


@pytest.mark.parametrize("b", [0.8, 1.2])
def test_closed_gamma(b):
    c = gamma_curve(make_ellipsoid(b))
    assert c.closed
    assert np.max(np.abs(np.hypot(*c.tangent.T) - 1)) <= 1e-10
    det = c.h[:, 0] * c.tangent[:, 1] - c.h[:, 1] * c.tangent[:, 0]
    assert np.min(det) > 0
    assert c.winding_number() == pytest.approx(1.0, abs=1e-9)
    assert all(inf["ordinary"] for inf in c.inflections)


def test_gamma0_slope_is_minus_omega(ell08):
    c = gamma_curve(ell08)
    q1, q2 = c.h.T
    on0 = (np.abs(q2) < 0.98 * q1) & (q1 > 0)
    slope = c.tangent[on0, 0] / c.tangent[on0, 1]
    assert np.max(np.abs(slope + omega(ell08, q2[on0]))) <= 1e-4


def test_gamma0_curvature_single_signed(ell08):
    c = gamma_curve(ell08)
    q1, q2 = c.h.T
    on0 = (np.abs(q2) < 0.98 * q1) & (q1 > 0)
    k = c.curvature[on0]
    assert np.all(k > 0) or np.all(k < 0)


def test_n_sigma_is_unit_level(ell08):
    cur = n_sigma_curve(ell08, 0.4, n=64)
    vals = q1_symbol(ell08, 0.4, cur.points[:, 0], cur.points[:, 1])
    assert np.max(np.abs(vals - 1)) <= 1e-10


@pytest.mark.parametrize("b", [0.8, 1.2])
def test_convexity_certified(b):
    assert convexity_check(make_ellipsoid(b)).passed


def test_convexity_on_sphere_is_constant_sign(sphere):
    rep = convexity_check(sphere)
    # g = 1: E = 1/f^2 exactly
    f = sphere.f(rep.sigma_grid)[:, None]
    assert np.max(np.abs(rep.E * f**2 - 1)) <= 1e-9


def test_symbol_derivative_oracles(ell08):
    rng = np.random.default_rng(3)
    pts = []
    for _ in range(12):
        s = rng.uniform(-1.0, 1.0)
        r = rng.uniform(0.5, 2.0)
        a = rng.uniform(0, 2 * np.pi)
        pts.append((s, r * np.cos(a), r * np.sin(a)))
    assert symbol_derivative_oracles(ell08, pts).passed


def test_table_derivatives_consistent(ell08):
    tab = clairaut_table(ell08)
    I = np.linspace(0.1, 0.9, 9)
    h = 1e-5
    fd = (tab.g(I + h) - tab.g(I - h)) / (2 * h)
    assert np.max(np.abs(fd - tab.g_prime(I))) <= 1e-8

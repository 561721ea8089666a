import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revspec import make_ellipsoid, omega, tau, twist_classify
from revspec.clairaut import clairaut_data, clairaut_table, delta_theta, omega_prime, periodic_directions, turning_point
from revspec.errors import InvalidParameter
from revspec.flow import CotangentState, geodesic_trajectory

I_GRID = np.round(np.arange(0.05, 0.96, 0.05), 2)


def test_sphere_tau_and_omega_exact(sphere):
    assert np.max(np.abs(tau(sphere, I_GRID) - 2 * np.pi)) <= 1e-6
    assert np.max(np.abs(omega(sphere, I_GRID))) <= 1e-6


@pytest.mark.parametrize("I", [0.02, 0.3, 0.6, 0.9, 0.995])
def test_ellipsoid_against_mpmath(ell08, oracle08, I):
    assert tau(ell08, I) == pytest.approx(oracle08.tau(I), rel=1e-12)
    assert delta_theta(ell08, I) == pytest.approx(oracle08.dtheta(I), rel=1e-12)


@pytest.mark.parametrize("I", [0.1, 0.5, 0.85])
def test_prolate_against_mpmath(ell12, oracle12, I):
    assert tau(ell12, I) == pytest.approx(oracle12.tau(I), rel=1e-12)
    assert delta_theta(ell12, I) == pytest.approx(oracle12.dtheta(I), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.6, 0.8, 1.2, 1.5]), st.floats(0.01, 0.99))
def test_turning_point_solves_f_equals_I(b, I):
    prof = make_ellipsoid(b)
    sp = turning_point(prof, I)
    assert abs(float(prof.f(sp)) - I) <= 1e-10
    d = clairaut_data(prof, I)
    assert d.sigma_minus == -d.sigma_plus


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.99))
def test_parity(I):
    prof = make_ellipsoid(0.8)
    assert omega(prof, -I) == -omega(prof, I)
    assert tau(prof, -I) == tau(prof, I)


def test_omega_limits(ell08):
    # omega(0) = 0 by convention, omega(1) from the equator's linearization
    assert float(omega(ell08, 0.0)) == 0.0
    k = ell08.curvature_at_equator
    assert float(omega(ell08, 1.0)) == pytest.approx(1 / np.sqrt(k) - 1, abs=1e-7)
    assert float(omega(ell08, 1.0)) == pytest.approx(0.8 - 1, abs=1e-7)


def test_omega_continuity(ell08):
    grid = np.linspace(0.001, 0.999, 512)
    w = omega(ell08, grid)
    wp = np.array([omega_prime(ell08, x) for x in grid[::32]])
    assert np.max(np.abs(np.diff(w))) <= 10 * (grid[1] - grid[0]) * np.max(np.abs(wp))


def test_omega_prime_two_ways(ell08):
    fd, ag = omega_prime(ell08, 0.4, return_both=True)
    assert fd == pytest.approx(ag, abs=1e-6)


def test_tau_matches_ode_geodesic(ell08):
    # one oscillation leaving the equator upwards: arc length tau(I), azimuth delta_theta(I)
    for I in (0.3, 0.75):
        T = tau(ell08, I)
        s0 = CotangentState(0.0, 0.0, I, np.sqrt(1 - I * I))
        traj = geodesic_trajectory(ell08, s0, np.linspace(0.0, T, 3), tol=1e-12)
        theta_end, sigma_end = traj[-1][1], traj[-1][2]
        assert abs(sigma_end) <= 1e-8
        advance = np.mod(theta_end, 2 * np.pi)
        expect = np.mod(delta_theta(ell08, I), 2 * np.pi)
        assert abs(advance - expect) <= 1e-5 * delta_theta(ell08, I)


def test_table_matches_direct(ell08):
    tab = clairaut_table(ell08)
    I = np.array([0.05, 0.4, 0.8, 0.97])
    assert np.max(np.abs(tab.omega(I) - omega(ell08, I))) <= 1e-12


@pytest.mark.parametrize(
    "b, cls",
    [(0.8, "negative-twist"), (1.2, "small-positive-twist"), (1.0, "fails-twist")],
)
def test_twist_classes(b, cls):
    assert twist_classify(make_ellipsoid(b)).cls == cls


def test_periodic_directions_rational(ell08):
    out = periodic_directions(ell08, 6)
    assert out
    for I, q in out:
        assert float(omega(ell08, I)) == pytest.approx(float(q), abs=1e-9)


def test_rejects_out_of_range(ell08):
    with pytest.raises(InvalidParameter):
        tau(ell08, 1.5)


def _bump(a, b, n=801):
    from revspec.surface import make_custom

    s = np.linspace(-np.pi / 2, np.pi / 2, n)
    c = np.cos(s)
    v = c * (1 + a * c**2 + b * c**6)
    v[0] = v[-1] = 0.0
    return make_custom(zip(s, v))


def test_custom_profile_mixed_twist():
    # flat equator with a steep shoulder: omega' changes sign
    prof = _bump(-0.3, 0.4)
    rep = twist_classify(prof)
    assert rep.cls == "mixed-sign"
    assert rep.min_omega_prime < 0 < rep.max_omega_prime


def test_custom_sphere_samples_reproduce_sphere():
    prof = _bump(0.0, 0.0)
    assert np.max(np.abs(tau(prof, I_GRID) - 2 * np.pi)) <= 1e-6
    assert np.max(np.abs(omega(prof, I_GRID))) <= 1e-6


def test_custom_near_equator_quadrature_converges():
    from revspec.clairaut import orbit_integrals

    prof = _bump(1.0, 0.0, n=1200)
    r = orbit_integrals(prof, [0.99999, 0.999999])
    assert np.all(r["n"] <= 4096)

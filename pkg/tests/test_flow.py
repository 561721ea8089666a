import numpy as np
import pytest

from revspec import bicharacteristic_length, make_ellipsoid
from revspec.errors import UnsupportedSurface
from revspec.flow import CotangentState, antipode, d_profile, geodesic_flow, geodesic_trajectory, q1_flow, state_distance


def _random_states(prof, n, seed):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        s = rng.uniform(-0.45, 0.45) * prof.L
        a = rng.uniform(0, 2 * np.pi)
        f = float(prof.f(s))
        out.append(CotangentState(rng.uniform(0, 2 * np.pi), s, f * np.cos(a), np.sin(a)))
    return out


def test_conservation(ell08):
    for st in _random_states(ell08, 4, 0):
        I0, p0 = st.clairaut(ell08), st.p1(ell08)
        end = geodesic_flow(ell08, st, 20.0, tol=1e-10)
        assert abs(end.clairaut(ell08) - I0) <= 1e-8
        assert abs(end.p1(ell08) - p0) <= 1e-8


def test_sphere_great_circle(sphere):
    # starting on the equator heading north-east: sigma(t) = asin(sin a sin t)
    a = 0.7
    st = CotangentState(0.0, 0.0, np.cos(a), np.sin(a))
    t = np.linspace(0, 3, 7)
    traj = geodesic_trajectory(sphere, st, t, tol=1e-12)
    assert np.max(np.abs(traj[:, 2] - np.arcsin(np.sin(a) * np.sin(t)))) <= 1e-9


@pytest.mark.parametrize("b", [0.8, 1.2])
def test_q1_flow_periodic_and_antipodal(b):
    prof = make_ellipsoid(b)
    for st in _random_states(prof, 4, 1):
        assert state_distance(q1_flow(prof, st, 2 * np.pi, tol=1e-12), st) <= 1e-6
        assert state_distance(q1_flow(prof, st, np.pi, tol=1e-12), antipode(st)) <= 1e-6


def test_q1_flow_oscillation_reaches_turning_points(ell08):
    from revspec.clairaut import turning_point

    st = _random_states(ell08, 1, 2)[0]
    sp = turning_point(ell08, abs(st.clairaut(ell08)))
    t = np.linspace(0, 2 * np.pi, 401)
    sig = np.array([q1_flow(ell08, st, x, tol=1e-11).sigma for x in t])
    assert sig.max() == pytest.approx(sp, abs=1e-3)
    assert sig.min() == pytest.approx(-sp, abs=1e-3)


def test_antipode_is_involution():
    st = CotangentState(1.0, 0.3, 0.2, -0.5)
    assert state_distance(antipode(antipode(st)), st) <= 1e-15


def test_meridian_through_pole(ell08):
    # a meridian state crosses the pole and comes back with theta shifted by pi
    st = CotangentState(0.5, 0.0, 0.0, 1.0)
    end = geodesic_flow(ell08, st, ell08.L)
    assert end.sigma == pytest.approx(0.0, abs=1e-12)
    assert end.Sigma == pytest.approx(-1.0)
    assert end.theta == pytest.approx(0.5 + np.pi)


def test_psi_sphere_is_great_circle_distance(sphere):
    rng = np.random.default_rng(4)
    for _ in range(6):
        t1, t2 = rng.uniform(0, 2 * np.pi, 2)
        s1, s2 = rng.uniform(-1.3, 1.3, 2)
        cosd = np.sin(s1) * np.sin(s2) + np.cos(s1) * np.cos(s2) * np.cos(t1 - t2)
        assert bicharacteristic_length(sphere, (t1, s1), (t2, s2)) == pytest.approx(np.arccos(cosd), abs=1e-9)


def test_psi_symmetric_and_bounded(ell08):
    rng = np.random.default_rng(5)
    for _ in range(4):
        x = (rng.uniform(0, 6), rng.uniform(-1, 1))
        y = (rng.uniform(0, 6), rng.uniform(-1, 1))
        a = bicharacteristic_length(ell08, x, y)
        assert 0 <= a <= np.pi
        assert a == pytest.approx(bicharacteristic_length(ell08, y, x), abs=1e-9)


def test_psi_connects_by_flow(ell08):
    # flowing from x along the connecting direction for time psi lands on y
    x, y = (0.0, 0.3), (2.0, -0.5)
    psi = bicharacteristic_length(ell08, x, y)
    from revspec.flow import _psi_solve

    _, I = _psi_solve(ell08, x, y)
    f = float(ell08.f(x[1]))
    for sgn in (1, -1):
        st = CotangentState(x[0], x[1], I * 1.0, sgn * np.sqrt(max(1 - (I / f) ** 2, 0.0)))
        end = q1_flow(ell08, st, psi, tol=1e-12)
        if abs(end.sigma - y[1]) < 1e-6:
            assert abs((end.theta - y[0] + np.pi) % (2 * np.pi) - np.pi) <= 1e-6
            break
    else:
        pytest.fail("no branch reached y")


def test_psi_approaches_pi_near_antipode(ell12):
    x = (0.4, 0.5)
    for off in [(1e-7, 0), (-1e-7, 0), (0, 1e-7)]:
        y = (x[0] + np.pi + off[0], -x[1] + off[1])
        assert bicharacteristic_length(ell12, x, y) == pytest.approx(np.pi, abs=1e-6)


def test_d_profile_second_derivative_sign(ell08):
    dp = d_profile(ell08, 0.5, np.linspace(0.5, 2.5, 5))
    assert np.all(dp.dtt < 0) or np.all(dp.dtt > 0)
    assert np.max(np.abs(dp.dt - dp.dt_fd)) <= 1e-5


def test_sphere_equator_ratio_is_half(sphere):
    dp = d_profile(sphere, 0.02, np.linspace(0.5, 2.5, 5))
    assert np.max(np.abs(dp.equator_ratio() - 0.5)) <= 5e-3


def test_unsupported_surface_refused(monkeypatch):
    import types

    import revspec.flow as flow

    prof = make_ellipsoid(0.95)
    monkeypatch.setattr(flow, "convexity_check", lambda p: types.SimpleNamespace(passed=False))
    with pytest.raises(UnsupportedSurface):
        bicharacteristic_length(prof, (0.0, 0.1), (1.0, 0.2))
    with pytest.raises(UnsupportedSurface):
        d_profile(prof, 0.3, [1.0])

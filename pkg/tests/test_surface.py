import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from revspec import make_ellipsoid, make_profile, validate
from revspec.errors import InvalidParameter, NotSimpleSymmetric, ValidationError
from revspec.surface import make_custom, read_profile_csv


def test_sphere_solves_harmonic_equation(sphere):
    s = np.linspace(-sphere.L / 2, sphere.L / 2, 200)
    assert np.max(np.abs(sphere.d2f(s) + sphere.f(s))) <= 1e-8
    assert sphere.L == pytest.approx(np.pi, abs=1e-15)


@pytest.mark.parametrize("b", [0.5, 0.8, 1.0, 1.2, 2.0])
def test_ellipsoid_validates(b):
    rep = validate(make_ellipsoid(b))
    assert rep.passed, rep.failures()
    assert rep.pole_slope_error <= 1e-6


def test_ellipsoid_against_parametric_meridian(ell08, oracle08):
    # point (cos u, b sin u) sits at arc length sigma(u) from the equator
    assert ell08.L == pytest.approx(oracle08.length(), rel=1e-13)
    for u in (0.1, 0.5, 1.0, 1.4):
        assert float(ell08.f(oracle08.sigma(u))) == pytest.approx(np.cos(u), abs=1e-12)


def test_ellipsoid_equator_curvature(ell08):
    # meridian ellipse curvature at the equator is a/b^2 with a = 1
    assert ell08.curvature_at_equator == pytest.approx(1 / 0.8**2, rel=1e-8)


def test_ellipsoid_family_continuous_in_b():
    s = np.linspace(0, 1.0, 300)
    a, b = make_ellipsoid(0.8), make_ellipsoid(0.801)
    assert np.max(np.abs(a.f(s) - b.f(s))) < 5e-3


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.0, 1.0))
def test_ellipsoid_symmetry_and_range(b, frac):
    prof = make_ellipsoid(b)
    s = frac * prof.L / 2
    assert float(prof.f(s)) == float(prof.f(-s))
    assert 0.0 <= float(prof.f(s)) <= 1.0 + 1e-15


def test_custom_profile_from_sphere_samples(sphere):
    s = np.linspace(-np.pi / 2, np.pi / 2, 401)
    prof = make_custom(zip(s, np.cos(s)))
    x = np.linspace(-1.5, 1.5, 77)
    assert np.max(np.abs(prof.f(x) - np.cos(x))) < 1e-8
    assert validate(prof).passed


def test_custom_profile_rescales_peak():
    s = np.linspace(-np.pi / 2, np.pi / 2, 201)
    prof = make_custom(zip(2 * s, 2 * np.cos(s)))
    assert prof.scale == pytest.approx(2.0)
    assert float(prof.f(0.0)) == pytest.approx(1.0)


def test_custom_rejects_asymmetric_samples():
    s = np.linspace(-1.5, 1.5, 31)
    v = np.cos(s) * (1 + 0.1 * s)
    v[0] = v[-1] = 0.0
    with pytest.raises(NotSimpleSymmetric):
        make_custom(zip(s, v))


def test_custom_rejects_two_bumps():
    s = np.linspace(-np.pi / 2, np.pi / 2, 201)
    v = np.cos(s) * (1 + 0.6 * np.sin(2 * s) ** 2)
    with pytest.raises(NotSimpleSymmetric):
        make_custom(zip(s, v))


def test_profile_csv(tmp_path):
    s = np.linspace(-np.pi / 2, np.pi / 2, 101)
    path = tmp_path / "p.csv"
    path.write_text("sigma,f\n" + "".join(f"{float(a)!r},{max(float(np.cos(a)), 0.0)!r}\n" for a in s))
    prof = make_profile(f"custom:path={path}")
    assert prof.kind == "custom-samples"
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0,1\n")
    with pytest.raises(InvalidParameter):
        read_profile_csv(bad)


@pytest.mark.parametrize("spec", ["torus", "ellipsoid", "ellipsoid:b=x", "ellipsoid:b=1,c=2", "sphere:r=2"])
def test_bad_surface_strings(spec):
    with pytest.raises(ValidationError):
        make_profile(spec)


def test_custom_even_sample_count_peak_between_samples():
    s = np.linspace(-np.pi / 2, np.pi / 2, 200)
    prof = make_custom(zip(s, np.cos(s)))
    assert validate(prof).passed
    assert float(prof.f(0.0)) == pytest.approx(1.0, abs=1e-15)


def test_custom_sq_gap_matches_direct_difference():
    s = np.linspace(-np.pi / 2, np.pi / 2, 300)
    prof = make_custom(zip(s, np.cos(s) * (1 + np.cos(s) ** 2)))
    h = prof.L / 2
    rng = np.random.default_rng(0)
    r = rng.uniform(-h, h, 2000)
    d = rng.uniform(0, 1, 2000) * (r + h)
    direct = prof.f(r - d) ** 2 - prof.f(r) ** 2
    assert np.max(np.abs(prof.sq_gap(r, d) - direct)) <= 1e-14
    # small gaps follow the derivative without cancellation
    r = np.array([1e-3, 0.2, 0.7])
    d = np.array([1e-12, 1e-12, 1e-12])
    lin = -2 * d * prof.f(r) * prof.df(r)
    assert np.max(np.abs(prof.sq_gap(r, d) / lin - 1)) <= 1e-6

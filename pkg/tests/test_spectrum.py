import math

import numpy as np
import pytest
from scipy.special import factorial, lpmv

from revspec import make_ellipsoid, solve_modes, spectrum_table, weyl_pointwise
from revspec.constants import LAMBDA_MAX_CAP
from revspec.errors import InvalidParameter, ResolutionFailure, TruncatedTable
from revspec.spectrum import joint_lattice_check, load_table, potential, radial_operator, save_table


@pytest.fixture(scope="module")
def sphere_table(sphere):
    return spectrum_table(sphere, 12.0)


@pytest.fixture(scope="module")
def ell_table(ell08):
    return spectrum_table(ell08, 14.0)


def _ylm_radial(n, k, s):
    # normalized so that 2 pi int |Phi|^2 cos(s) ds = 1
    norm = np.sqrt((2 * n + 1) / (4 * np.pi) * factorial(n - k) / factorial(n + k))
    return norm * lpmv(k, n, np.sin(s))


def test_potential_on_sphere(sphere):
    assert potential(sphere, 0, 0.0) == pytest.approx(-0.5, abs=1e-14)
    s = np.linspace(-1.4, 1.4, 15)
    for k in (0, 1, 3):
        ref = k * k / np.cos(s) ** 2 - 0.5 - np.tan(s) ** 2 / 4
        assert np.max(np.abs(potential(sphere, k, s) - ref)) <= 1e-10 * np.max(np.abs(ref))


def test_liouville_transform_identity(ell08):
    # -(1/f)(f Phi')' + k^2/f^2 Phi == f^{-1/2} (-u'' + V_k u) with u = f^{1/2} Phi
    s = np.linspace(-1.0, 1.0, 9)
    h = 1e-3
    k = 2
    Phi = lambda x: np.cos(3 * x) + x**2  # noqa: E731
    f = ell08.f

    def d(fun, x):
        return (fun(x + h) - fun(x - h)) / (2 * h)

    def d2(fun, x):
        return (fun(x + h) - 2 * fun(x) + fun(x - h)) / h**2

    lhs = -d(lambda x: f(x) * d(Phi, x), s) / f(s) + k * k / f(s) ** 2 * Phi(s)
    u = lambda x: np.sqrt(f(x)) * Phi(x)  # noqa: E731
    rhs = (-d2(u, s) + potential(ell08, k, s) * u(s)) / np.sqrt(f(s))
    assert np.max(np.abs(lhs - rhs)) <= 1e-4


def test_sphere_eigenvalues(sphere_table):
    n = sphere_table.k + sphere_table.l
    exact = np.sqrt(n * (n + 1.0))
    pos = n > 0
    # the default grid targets ~1e-5 relative at the top of the table
    assert np.max(np.abs(sphere_table.lam[pos] - exact[pos]) / exact[pos]) <= 2e-5
    assert sphere_table.lam[~pos][0] ** 2 <= 1e-9
    # multiplicity 2n + 1 for each n
    for m in range(1, 11):
        sel = n == m
        assert int(np.sum(sphere_table.multiplicity[sel])) == 2 * m + 1


def test_sphere_eigenfunctions_are_legendre(sphere):
    modes = solve_modes(sphere, 2, 8.0, n_grid=4000)
    for m in modes[:4]:
        ref = _ylm_radial(m.k + m.l, m.k, m.sigma)
        err = min(np.max(np.abs(m.phi - ref)), np.max(np.abs(m.phi + ref)))
        assert err <= 1e-4 * np.max(np.abs(ref))


def test_sphere_pole_values(sphere):
    # only k = 0 modes reach the pole: |Phi(pole)|^2 = (2n+1)/(4 pi)
    for m in solve_modes(sphere, 0, 10.0, n_grid=4000):
        assert m.pole**2 == pytest.approx((2 * m.l + 1) / (4 * np.pi), rel=1e-3)
    assert all(m.pole == 0.0 for m in solve_modes(sphere, 1, 10.0, n_grid=4000))


@pytest.mark.parametrize("k", [0, 3, 9])
def test_orthonormality(ell08, k):
    modes = solve_modes(ell08, k, 14.0, n_grid=3000)
    P = np.array([m.phi for m in modes])
    f = ell08.f(modes[0].sigma)
    G = 2 * np.pi * (P * f) @ P.T * modes[0].h
    assert np.max(np.abs(np.diag(G) - 1)) <= 1e-8
    assert np.max(np.abs(G - np.diag(np.diag(G)))) <= 1e-6
    lam = np.array([m.lam for m in modes])
    assert np.all(np.diff(lam) > 0)
    assert [m.l for m in modes] == list(range(len(modes)))


def test_grid_halving(ell08):
    a = spectrum_table(ell08, 14.0, n_grid=2000)
    b = spectrum_table(ell08, 14.0, n_grid=4000)
    assert np.array_equal(a.k, b.k) and np.array_equal(a.l, b.l)
    pos = b.lam > 1e-3
    assert np.max(np.abs(a.lam[pos] - b.lam[pos]) / b.lam[pos]) <= 1e-4


def test_complete_below_lambda_max(ell_table, ell08):
    # every k with some mode below lambda_max has l = 0 .. l_max without gaps
    for k in np.unique(ell_table.k):
        ls = np.sort(ell_table.l[ell_table.k == k])
        assert np.array_equal(ls, np.arange(ls.size))
    # against the direct solver at a finer grid
    ref = [m.lam for m in solve_modes(ell08, 5, 14.0, n_grid=6000)]
    got = np.sort(ell_table.lam[ell_table.k == 5])
    assert len(ref) == got.size


def test_weyl_count(ell_table):
    # total count follows the area law within a few percent at this size
    assert 0.8 <= ell_table.info["weyl_ratio"] <= 1.05


def test_sphere_pointwise_weyl_is_constant(sphere_table):
    # addition theorem: sum over the degree-n shell of |Y|^2 = (2n+1)/(4 pi)
    lam = 10.4
    nmax = 9
    exact = sum(2 * n + 1 for n in range(nmax + 1)) / (4 * np.pi)
    for s in (-1.0, 0.0, 0.4, 1.3):
        N = weyl_pointwise(sphere_table, (0.0, s), lam)["N"]
        assert N == pytest.approx(exact, rel=1e-4)
    w = weyl_pointwise(sphere_table, (0.0, 0.2), lam)
    assert w["c_W"] == pytest.approx(np.pi * np.cos(0.2))
    with pytest.raises(TruncatedTable):
        weyl_pointwise(sphere_table, (0.0, 0.0), 20.0)


def test_forbidden_zone_truncation(ell08):
    op = radial_operator(ell08, 10, 2000, lambda_max=12.0)
    full = radial_operator(ell08, 10, 2000)
    assert op.d.size < full.d.size
    a = [m.lam for m in solve_modes(ell08, 10, 12.0, n_grid=2000)]
    from revspec.tridiag import eigvals_below

    b = np.sqrt(eigvals_below(full.d, full.e, 12.0**2))
    assert np.max(np.abs(np.array(a) - b)) <= 1e-12 * 12


def test_resolution_guards(ell08):
    with pytest.raises(InvalidParameter):
        solve_modes(ell08, 0, 5.0, n_grid=100)
    with pytest.raises(ResolutionFailure, match="n_grid >="):
        solve_modes(ell08, 0, 100.0, n_grid=500)
    with pytest.raises(InvalidParameter):
        spectrum_table(ell08, LAMBDA_MAX_CAP + 1)


def test_csv_round_trip(tmp_path, ell_table, ell08):
    save_table(ell_table, tmp_path)
    back = load_table(tmp_path, ell08)
    assert np.array_equal(back.k, ell_table.k)
    assert np.array_equal(back.l, ell_table.l)
    assert np.array_equal(back.lam, ell_table.lam)
    assert np.array_equal(back.phi, ell_table.phi)
    assert np.array_equal(back.sigma, ell_table.sigma)
    rows = (tmp_path / "modes.csv").read_text().splitlines()
    assert len(rows) - 1 == ell_table.count


def test_threads_bit_identical(ell08):
    a = spectrum_table(ell08, 10.0, threads=1)
    b = spectrum_table(ell08, 10.0, threads=3)
    assert np.array_equal(a.lam, b.lam) and np.array_equal(a.phi, b.phi)


def test_stored_profiles_interpolate(ell_table, ell08):
    # stored samples agree with a direct solve at the solver's cell centres
    m = solve_modes(ell08, 4, 14.0, n_grid=ell_table.n_grid)[1]
    j = int(np.nonzero((ell_table.k == 4) & (ell_table.l == 1))[0][0])
    v = ell_table.values(m.sigma)[j]
    assert np.max(np.abs(v - m.phi)) <= 1e-6 * np.max(np.abs(m.phi))


def test_sphere_lattice_distance_decays(sphere_table):
    # q1 = lambda on the sphere and sqrt(n(n+1)) = n + 1/2 - 1/(8n) + ...
    rep = joint_lattice_check(sphere_table, lambda_min=1.0)
    n = np.round(rep.lam - 0.5)
    assert np.max(np.abs(rep.distance - np.abs(np.sqrt(n * (n + 1)) - n - 0.5))) <= 2e-4
    assert rep.decay_exponent == pytest.approx(-1.0, abs=0.2)


def test_ellipsoid_lattice_windows_shrink(ell08):
    T = spectrum_table(ell08, 40.0)
    rep = joint_lattice_check(T, lambda_min=2.0)
    assert np.all(np.diff(rep.window_max) < 0)
    assert math.isfinite(rep.decay_exponent) and rep.decay_exponent < 0

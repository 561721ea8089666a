import mpmath as mp
import numpy as np
import pytest
from scipy.special import fresnel, j0

from revspec.constants import MIXED_BOUND_CONSTANT
from revspec.errors import InvalidParameter
from revspec.oscint import (
    Phase2D,
    SampledPhase1D,
    circle_curve,
    decay_fit,
    dmu_hat,
    mixed_bound_verify,
    osc_integral_1d,
    phase_corpus,
    plateau_bump,
    synthetic_inflection_curve,
    vdc_bound,
    vdc_constant,
    vdc_detect,
)

CORPUS = phase_corpus()
ONE = lambda x: np.ones_like(np.asarray(x, float))  # noqa: E731


def _fresnel_exact(lam):
    # int_{-1}^{1} exp(i lam x^2) dx
    z = np.sqrt(2 * lam / np.pi)
    S, C = fresnel(z)
    return 2 * np.sqrt(np.pi / (2 * lam)) * (C + 1j * S)


def test_vdc_constants():
    assert vdc_constant(1) == 3
    assert vdc_constant(2) == 8
    assert vdc_constant(3) == 18
    with pytest.raises(InvalidParameter):
        vdc_constant(0)


@pytest.mark.parametrize("lam", [10.0, 300.0, 1e4, 1e6])
def test_fresnel_integral(lam):
    ph = SampledPhase1D.polynomial([0, 0, 1], -1.0, 1.0)
    val = osc_integral_1d(ph, ONE, lam, rtol=1e-10)
    assert abs(val - _fresnel_exact(lam)) <= 1e-8 * abs(_fresnel_exact(lam))


def test_linear_phase_closed_form():
    ph = SampledPhase1D.polynomial([0, 1], 0.0, 1.0)
    for lam in (7.0, 123.0, 5e5, 5e7):
        exact = (np.exp(1j * lam) - 1) / (1j * lam)
        # large lambda: the value is O(1/lambda), so an absolute floor is needed
        assert abs(osc_integral_1d(ph, ONE, lam, rtol=1e-10, atol=1e-14) - exact) <= 1e-9 * abs(exact) + 1e-12


def test_amplitude_against_mpmath():
    ph = SampledPhase1D.polynomial([0, 0, 0, 1], -1.0, 1.0)
    amp = lambda x: np.exp(-x) * (1 + x**2)  # noqa: E731
    lam = 40.0
    with mp.workdps(25):
        f = lambda x: mp.exp(1j * lam * x**3) * mp.exp(-x) * (1 + x**2)  # noqa: E731
        ref = complex(mp.quad(f, mp.linspace(-1, 1, 41)))
    assert abs(osc_integral_1d(ph, amp, lam, rtol=1e-12) - ref) <= 1e-10


@pytest.mark.parametrize("name", list(CORPUS))
def test_corpus_derivatives_consistent(name):
    ph, _ = CORPUS[name]
    assert ph.consistency_check() <= 1e-5


@pytest.mark.parametrize("name", list(CORPUS))
def test_certificate_holds_on_finer_grid(name):
    ph, p = CORPUS[name]
    cert = vdc_detect(ph, p, n_grid=2001)
    assert cert.verify(ph, n_fine=20010)
    assert cert.p <= p
    assert cert.c > 0


@pytest.mark.parametrize("name", list(CORPUS))
def test_bound_dominates(name):
    ph, p = CORPUS[name]
    cert = vdc_detect(ph, p)
    for lam in np.logspace(1, 5, 9):
        assert abs(osc_integral_1d(ph, ONE, lam, atol=1e-13)) <= vdc_bound(cert, lam)


def test_certificate_orders_for_degenerate_point():
    # x^3 vanishes to second order at 0, so a piece of order 3 is needed there
    ph, _ = CORPUS["x^3 on [-1,1]"]
    cert = vdc_detect(ph, 3)
    assert 3 in cert.orders


def test_bound_scales_like_lambda_power():
    ph, _ = CORPUS["x^2 on [-1,1]"]
    cert = vdc_detect(ph, 2)
    r = vdc_bound(cert, 1e4) / vdc_bound(cert, 1e2)
    assert r == pytest.approx(0.1, rel=1e-12)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_circle_fourier_transform_is_bessel(R):
    # weight |det(h', h)| = R on the circle of radius R
    c = circle_curve(R)
    for lam in (3.0, 17.0, 60.0):
        v = dmu_hat(c, lam, (0.6, 0.8))
        assert abs(v - 2 * np.pi * R**2 * j0(lam * R)) <= 1e-10 * max(1.0, abs(v))


def test_dmu_hat_small_lambda_is_weighted_length():
    c = synthetic_inflection_curve()
    v = dmu_hat(c, 1e-9, (1.0, 0.0))
    assert abs(v - c.weighted_length()) <= 1e-8 * c.weighted_length()


def test_circle_decay_is_half():
    fit = decay_fit(circle_curve(1.0), (1.0, 0.0), np.logspace(1, 3, 60))
    assert fit.exponent == pytest.approx(-0.5, abs=0.05)


def test_inflection_direction_decays_slower():
    # the default curve has its inflection tangent horizontal, normal (0, 1)
    fit = decay_fit(synthetic_inflection_curve(), (0.0, 1.0), np.logspace(1, 3, 60))
    assert fit.exponent == pytest.approx(-1 / 3, abs=0.05)


def test_phase2d_polynomial_derivatives():
    C = np.zeros((4, 3))
    C[0, 2] = 0.5
    C[3, 1] = 1.0
    ph = Phase2D.polynomial(C)
    x, y, h = 0.3, -0.7, 1e-5
    assert ph.deriv(x, y, 0, 1) == pytest.approx(y + x**3)
    assert ph.deriv(x, y, 3, 1) == pytest.approx(6.0)
    fd = (ph(x + h, y) - ph(x - h, y)) / (2 * h)
    assert ph.deriv(x, y, 1, 0) == pytest.approx(fd, rel=1e-8)


def test_plateau_bump():
    s = np.linspace(-1.5, 1.5, 301)
    b = plateau_bump(s)
    assert np.all(b[np.abs(s) <= 0.5] == 1)
    assert np.all(b[np.abs(s) >= 1] == 0)
    assert np.all((b >= 0) & (b <= 1))


def test_calibration_phase_within_bound():
    # the constant is calibrated on x^2/2 + y^2/2
    assert MIXED_BOUND_CONSTANT == pytest.approx(0.0130)
    C = np.zeros((3, 3))
    C[0, 2] = 0.5
    C[2, 0] = 0.5
    rep = mixed_bound_verify(Phase2D.polynomial(C), np.logspace(2, 3.5, 6), 2)
    assert rep.bound_ratio_sup <= 1.0
    assert np.isfinite(rep.scaling_sup)

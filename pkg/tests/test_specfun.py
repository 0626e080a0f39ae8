import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from kpzopen import specfun as sf


@settings(max_examples=200, deadline=None)
@given(st.floats(-30, 30), st.floats(-40, 40))
def test_log_gamma_matches_scipy(x, y):
    z = complex(x, y)
    if x <= 0.5 and abs(z - round(x)) < 1e-6:
        return  # poles are rejected within a tolerance
    ref = special.loggamma(z)
    got = sf.log_gamma(z)
    assert abs(got.real - ref.real) <= 1e-12 * max(1.0, abs(ref.real))
    # branch may differ by 2 pi i only where scipy uses a different cut; compare mod 2 pi
    assert abs(math.remainder(got.imag - ref.imag, 2 * math.pi)) <= 1e-10 * max(1.0, abs(ref.imag))


@pytest.mark.parametrize("n", range(1, 11))
def test_log_gamma_factorials(n):
    assert math.exp(sf.log_gamma(n).real) == pytest.approx(math.factorial(n - 1), rel=1e-12)


@pytest.mark.parametrize("z, val", [(2, 1.0), (3, 4.0), (1j, math.pi / math.sinh(math.pi))])
def test_abs_gamma_sq(z, val):
    assert sf.abs_gamma_sq(z) == pytest.approx(val, rel=1e-12)


def test_log_abs_gamma_sq_line_matches_scipy():
    y = np.linspace(0, 60, 301)
    for x in (-1.7, -0.3, 0.25, 1.0, 3.5):
        ref = 2 * special.loggamma(x + 1j * y).real
        np.testing.assert_allclose(sf.log_abs_gamma_sq_line(x, y)[1:], ref[1:], rtol=1e-12, atol=1e-11)


@pytest.mark.parametrize("n, x, val", [(1, 0.0, -0.5), (2, 0.0, 1 / 6), (3, 0.0, 0.0)])
def test_bernoulli_poly_values(n, x, val):
    assert sf.bernoulli_poly(n, x) == pytest.approx(val, abs=1e-15)


@pytest.mark.parametrize("n", range(0, 11))
def test_bernoulli_poly_identities(n):
    for x in np.linspace(-2, 2, 17):
        assert sf.bernoulli_poly(n, 1 - x) == pytest.approx((-1) ** n * sf.bernoulli_poly(n, x), abs=1e-9)
        rhs = n * x ** (n - 1) if n > 0 else 0.0
        assert sf.bernoulli_poly(n, x + 1) - sf.bernoulli_poly(n, x) == pytest.approx(rhs, abs=1e-9)


@pytest.mark.parametrize("s, z, val", [(2, 1, math.pi ** 2 / 6), (0, 0.7, -0.2), (-1, 0.5, 1 / 24)])
def test_hurwitz_zeta_values(s, z, val):
    assert complex(sf.hurwitz_zeta(s, z)).real == pytest.approx(val, rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("s, z", [(1.5, 0.3), (2.5, 2.0), (4.0, 0.9)])
def test_hurwitz_zeta_scipy(s, z):
    assert complex(sf.hurwitz_zeta(s, z)).real == pytest.approx(special.zeta(s, z), rel=1e-12)


@pytest.mark.parametrize("n", range(0, 6))
def test_hurwitz_at_negative_integers(n):
    for z in (0.2, 0.7, 1.9):
        assert complex(sf.hurwitz_zeta(-n, z)).real == pytest.approx(-sf.bernoulli_poly(n + 1, z) / (n + 1), abs=1e-12)


@pytest.mark.parametrize("a, q, j, val", [(0.3, 0.4, 0, 1.0), (0.5, 0.0, 3, 0.5), (0.5, 0.5, 2, 0.375)])
def test_qpoch_finite(a, q, j, val):
    assert complex(sf.qpoch_finite(a, q, j)).real == pytest.approx(val, rel=1e-15)


def test_log_qpoch_inf_trivial():
    assert abs(sf.log_qpoch_inf(0.0, 0.7)) == 0
    assert complex(sf.log_qpoch_inf(0.5, 0.0)).real == pytest.approx(math.log(0.5))


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(-math.pi, math.pi), st.floats(0.01, 0.9))
def test_log_qpoch_product_vs_series(r, phi, q):
    a = r * complex(math.cos(phi), math.sin(phi))
    assert abs(sf.log_qpoch_inf(a, q) - sf.log_qpoch_inf_series(a, q)) <= 1e-12 * max(1.0, abs(sf.log_qpoch_inf(a, q)))


@pytest.mark.parametrize("r, q", [(0.3, 0.5), (0.95, 0.9), (3.0, 0.8)])
def test_polar_form_matches_complex(r, q):
    phi = np.linspace(0.05, 3.1, 7)
    got = sf.log_abs_qpoch_polar_sq(r, phi, q)
    ref = [2 * complex(sf.log_qpoch_inf(r * np.exp(1j * p), q)).real for p in phi]
    np.testing.assert_allclose(got, ref, rtol=1e-11, atol=1e-11)


@pytest.mark.parametrize("x, j, val", [(0.4, 0, 1.0), (1, 4, 24.0), (-0.5, 2, -0.25)])
def test_pochhammer_rising(x, j, val):
    assert sf.pochhammer_rising(x, j) == pytest.approx(val)


def test_theta_basics():
    assert abs(sf.theta1(0, 1.3)) == 0
    assert sf.theta4(0.37, 50) == pytest.approx(1.0, abs=1e-10)
    nu = 0.21 + 0.13j
    assert sf.theta1(-nu, 0.8) == pytest.approx(-sf.theta1(nu, 0.8), rel=1e-13)
    assert sf.theta4(-nu, 0.8) == pytest.approx(sf.theta4(nu, 0.8), rel=1e-13)


@pytest.mark.parametrize("kappa", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("z", [0.3, 0.7 + 0.4j, 1.2 - 0.1j, 0.3 + 0.2j])
@pytest.mark.parametrize("negative", [False, True])
def test_theta_identities(kappa, z, negative):
    lhs, rhs = sf.theta_identity_sides(kappa, z, negative)
    assert abs(lhs - rhs) <= 1e-9 * abs(rhs)


def test_a_plus_a_minus():
    k = 0.3
    assert sf.a_plus(k, 1) == pytest.approx(-math.pi ** 2 / (6 * k) - 0.5 * math.log(k) + 0.5 * math.log(2 * math.pi))
    assert sf.a_minus(k, 0.5) == pytest.approx(math.pi ** 2 / (12 * k))
    assert sf.a_minus(1, 1.5) == pytest.approx(math.pi ** 2 / 12 - math.log(2))


def test_qpoch_asymptotic_basics():
    r = sf.qpoch_asymptotic(0.25, 0.5, "minus")
    assert r.correction == 0
    assert r.value == pytest.approx(complex(sf.log_qpoch_inf(-math.exp(-0.125), math.exp(-0.25))))
    with pytest.raises(sf.SpecfunError):
        sf.qpoch_asymptotic(0.1, 60j)


@pytest.mark.parametrize("z", [1.3, 0.4 + 0.7j, -0.2 + 0.1j])
@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_qpoch_asymptotic_order(z, sign):
    ks = 2.0 ** -np.arange(3, 11)
    errs = [sf.qpoch_asymptotic(k, z, sign).error_measured for k in ks]
    slope = np.polyfit(np.log(ks), np.log(errs), 1)[0]
    assert slope >= 0.9
    assert max(e / k for e, k in zip(errs, ks)) < 10


def test_higher_order_correction_improves():
    k, z = 2.0 ** -6, 0.4 + 0.7j
    e1 = sf.qpoch_asymptotic(k, z, "plus", 1).error_measured
    e3 = sf.qpoch_asymptotic(k, z, "plus", 3).error_measured
    assert e3 < e1 * k

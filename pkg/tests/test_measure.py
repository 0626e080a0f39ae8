import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kpzopen import measure as ms
from kpzopen.askey_wilson import AwParams, AwProcessParams, aw_measure

SPEC = ms.QuadratureSpec()


def uniform():
    return ms.MixedMeasure(0.0, 1.0, lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def gamma_sqrt_chart(k=1.5):
    # Gamma(k) density on (0, inf) written in the sqrt chart
    lg = math.lgamma(k)
    return ms.MixedMeasure(0.0, math.inf, lambda x: (k - 1) * np.log(x) - x - lg, chart="sqrt")


def test_uniform_moments():
    assert ms.total_mass(uniform(), SPEC) == pytest.approx(1.0, abs=1e-14)
    assert ms.integrate(uniform(), lambda x: x ** 2, SPEC) == pytest.approx(1 / 3, abs=1e-10)


def test_pure_atoms():
    mu = ms.pure_atoms([(2.0, 0.3), (5.0, 0.7)])
    assert ms.integrate(mu, lambda x: x, SPEC) == pytest.approx(4.1, rel=1e-15)
    assert ms.log_integrate(mu, None, SPEC) == pytest.approx(0.0, abs=1e-15)


def test_zero_measure():
    mu = ms.MixedMeasure(0.0, 1.0, lambda x: np.full(np.shape(x), -np.inf))
    assert ms.total_mass(mu, SPEC) == 0.0


def test_sqrt_chart_gamma_mean():
    mu = gamma_sqrt_chart(1.5)
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, rel=1e-12)
    assert ms.integrate(mu, lambda x: x, SPEC) == pytest.approx(1.5, rel=1e-12)


def test_cos_chart_semicircle():
    mu = ms.MixedMeasure(-1.0, 1.0, lambda x: np.log(2 / math.pi * np.sqrt(1 - x * x)), chart="cos")
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, rel=1e-13)
    assert ms.integrate(mu, lambda x: x * x, SPEC) == pytest.approx(0.25, rel=1e-13)


def test_mixed_log_integrate_matches_integrate():
    base = gamma_sqrt_chart(2.0)
    mu = ms.MixedMeasure(0.0, math.inf, base.log_density, (ms.Atom(-1.0, math.log(0.5)),), False, "sqrt")
    f = lambda x: np.exp(-0.3 * np.asarray(x))  # noqa: E731
    a = ms.integrate(mu, f, SPEC)
    b = math.exp(ms.log_integrate(mu, lambda x: -0.3 * np.asarray(x), SPEC))
    assert a == pytest.approx(b, rel=1e-13)
    assert a == pytest.approx((1 / 1.3) ** 2 + 0.5 * math.exp(0.3), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_integrate_linear(a, b):
    mu = gamma_sqrt_chart(2.5)
    f, g = (lambda x: np.sin(x)), (lambda x: np.exp(-x))
    lhs = ms.integrate(mu, lambda x: a * f(x) + b * g(x), SPEC)
    rhs = a * ms.integrate(mu, f, SPEC) + b * ms.integrate(mu, g, SPEC)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_chain_identity_kernel_on_atoms():
    mu = ms.pure_atoms([(1.0, 0.25), (3.0, 0.75)])
    nu = ms.chain(mu, lambda x: ms.pure_atoms([(x, 1.0)]), SPEC)
    assert [(a.location, a.mass) for a in nu.atoms] == pytest.approx([(1.0, 0.25), (3.0, 0.75)])


def test_chain_constant_kernel():
    mu = gamma_sqrt_chart(2.0).tilt(lambda x: np.full(np.shape(x), math.log(3.0)))
    target = uniform()
    nu = ms.chain(mu, lambda x: target, SPEC)
    assert ms.total_mass(nu, SPEC) == pytest.approx(3.0, rel=1e-12)
    assert nu.density(np.array([0.2, 0.7])) == pytest.approx([3.0, 3.0], rel=1e-12)


def test_chain_rejects_mismatched_supports():
    mu = ms.pure_atoms([(0.0, 0.5), (1.0, 0.5)])
    k = lambda x: ms.MixedMeasure(0.0, 1.0 + x, lambda y: np.zeros_like(y))  # noqa: E731
    with pytest.raises(ms.MeasureError):
        ms.chain(mu, k, SPEC)


def test_self_convergence_aw():
    mu = aw_measure(AwParams(1.4, -0.3, 0.4, -0.2, 0.5))
    a = ms.total_mass(mu, SPEC)
    b = ms.total_mass(mu, SPEC.refined())
    assert abs(a - b) < 10 * SPEC.rel_tol
    assert a == pytest.approx(1.0, abs=1e-6)


def test_quadrature_spec_validation():
    with pytest.raises(ms.MeasureError):
        ms.QuadratureSpec(panels=0)
    with pytest.raises(ms.MeasureError):
        ms.QuadratureSpec(rel_tol=0)

import math

import numpy as np
import pytest
from scipy import integrate as sint
from scipy.special import loggamma

from kpzopen import cdh
from kpzopen import measure as ms

SPEC = ms.QuadratureSpec()


@pytest.mark.parametrize("args, tag, natoms", [
    ((0.5, 0.7 + 0.3j, 0.7 - 0.3j), "P", 0),
    ((0.5, 1.0, 1.5), "P", 0),
    ((-0.4, 1.0, 1.5), "N1", 1),
    ((-1.3, 2.0, 2.5), "N1", 2),
    ((-1.3, 1.3, 2.0), "N2", 1),
    ((-1.5, 0.5, 0.8), "N2", 2),
])
def test_cdh_normalization(args, tag, natoms):
    mu = cdh.cdh(*args)
    assert mu.meta["cdh"].tag == tag
    assert len(mu.atoms) == natoms
    assert all(a.mass > 0 for a in mu.atoms)
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, abs=1e-10)


def test_cdh_n2_single_atom():
    mu = cdh.cdh(-1.3, 1.3, 2.0)
    assert mu.atoms[0].mass == pytest.approx(1.0, abs=1e-10)
    assert not mu.has_density


def test_cdh_density_against_scipy():
    # independent evaluation of the density with scipy gamma functions
    a, b, c = 0.5, 0.7 + 0.3j, 0.7 - 0.3j
    mu = cdh.cdh(a, b, c)

    def dens(x):
        t = math.sqrt(x)
        lg = sum(2 * loggamma(p + 0.5j * t).real for p in (a, b, c)) - 2 * loggamma(1j * t).real
        lg -= (loggamma(a + b) + loggamma(a + c) + loggamma(b + c)).real
        return math.exp(lg) / (8 * math.pi * t)

    xs = np.array([0.3, 2.0, 11.0])
    np.testing.assert_allclose(mu.density(xs), [dens(x) for x in xs], rtol=1e-11)
    val, _ = sint.quad(dens, 0, np.inf, limit=400)
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("args", [(-2.3, 1.3, 4.0), (-1.2, 0.2, 3.0)])
def test_signed_masses_rejected(args):
    with pytest.raises(cdh.AdmissibilityError):
        cdh.cdh(*args)


@pytest.mark.parametrize("args", [(0.5, -1.0, 2.0), (-0.4, 1.0 + 1j, 2.0), (0.5, -0.2 + 1j, -0.2 - 1j)])
def test_cdh_inadmissible(args):
    with pytest.raises(cdh.AdmissibilityError):
        cdh.cdh(*args)


@pytest.mark.parametrize("args, tag", [
    ((0.3, 0.5, 0.6 + 0.2j, 0.6 - 0.2j), "P1"),
    ((0.3, 0.6, 0.9, 1.2), "P1"),
    ((0.4 + 0.5j, 0.4 - 0.5j, 0.7, 1.1), "P2"),
    ((-0.6, 1.0, 1.3, 1.7), "N1"),
    ((-1.2, 0.2, 0.5, 1.5), "N2"),
    ((-1.4, 1.4, 0.5, 2.0), "N2"),
])
def test_wilson_normalization(args, tag):
    mu = cdh.wilson_measure(*args)
    assert mu.meta["wilson"][0] == tag
    assert all(a.mass > 0 for a in mu.atoms)
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, abs=1e-10)


def test_wilson_n2_k0_single_atom():
    mu = cdh.wilson_measure(-1.4, 1.4, 0.5, 2.0)
    assert len(mu.atoms) == 1 and mu.atoms[0].mass == pytest.approx(1.0, abs=1e-12)


def test_wilson_p2_density_nonnegative():
    mu = cdh.wilson_measure(0.4 + 0.5j, 0.4 - 0.5j, 0.7 + 0.2j, 0.7 - 0.2j)
    d = mu.density(np.linspace(0.01, 50, 200))
    assert np.all(np.isfinite(d)) and np.all(d >= 0)


def test_wilson_signed_rejected():
    with pytest.raises(cdh.AdmissibilityError):
        cdh.wilson_measure(-1.6, 0.6, 1.9, 2.2)


# ---------------------------------------------------------------- process

def test_time_constants():
    assert cdh.CdhProcessParams(1.0, 0.5).c_uv == 2.0
    assert cdh.CdhProcessParams(0.4, 0.5).c_uv == pytest.approx(0.8)
    assert cdh.CdhProcessParams(-0.2, 0.5).c_uv == 2.0
    assert cdh.CdhProcessParams(0.4, 0.5).c_duv(2) == pytest.approx(0.4)
    with pytest.raises(cdh.AdmissibilityError):
        cdh.CdhProcessParams(0.3, -0.5)
    with pytest.raises(cdh.TimeRangeError):
        cdh.atom_grid(cdh.CdhProcessParams(0.4, 0.5), 0.8)


def test_marginal_atoms():
    pp = cdh.CdhProcessParams(1.0, 0.5)
    for s in np.linspace(0, 1.9, 8):
        assert cdh.atom_grid(pp, s).flavor == "none"
    g = cdh.atom_grid(cdh.CdhProcessParams(2.0, -0.6), 0.0)
    assert g.flavor == "v" and g.locations == pytest.approx((-1.44,))
    assert not cdh.marginal(pp, 0.3).is_probability


def test_marginal_density_prefactor():
    u, v, s, r = 1.0, 0.5, 0.4, 2.3
    t = math.sqrt(r)
    lg = 2 * (loggamma(s / 2 + v + 0.5j * t).real + loggamma(-s / 2 + u + 0.5j * t).real) - 2 * loggamma(1j * t).real
    ref = (u + v) * (u + v + 1) / (8 * math.pi) * math.exp(lg) / t
    assert cdh.marginal_density(cdh.CdhProcessParams(u, v), s, r) == pytest.approx(ref, rel=1e-11)


def test_small_r_envelope():
    pp = cdh.CdhProcessParams(1.0, 0.5)
    r = np.geomspace(1e-8, 1.0, 60)
    ratio = cdh.marginal_density(pp, 0.0, r) / (r ** (pp.u + pp.v - 1) + r ** -0.5)
    assert np.all(np.isfinite(ratio)) and ratio.max() < 10 * ratio.min() + 1


def test_transition_mass():
    mu = cdh.transition(cdh.CdhProcessParams(1.0, 0.5), 0.2, 0.8, 2.0)
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, abs=1e-6)


def test_transition_outside_support():
    with pytest.raises(cdh.SupportError):
        cdh.transition(cdh.CdhProcessParams(2.0, -0.6), 0.3, 0.5, -2.0)


@pytest.mark.parametrize("u, v, s, t", [(2.0, -0.6, 0.3, 1.0), (-0.6, 2.0, 0.3, 1.7), (-1.3, 2.0, 0.2, 1.5)])
def test_structural_zeros(u, v, s, t):
    z = cdh.structural_zeros(cdh.CdhProcessParams(u, v), s, t)
    vals = [x for vs in z.values() for x in vs]
    assert vals and all(x == 0.0 for x in vals)


def test_v_atom_source_extra_zero():
    # from x^v_j(s) only targets x^v_k(t) with k >= j carry mass
    pp = cdh.CdhProcessParams(2.0, -1.6)
    s, t = 0.1, 0.6
    src = cdh.x_v(-1.6, 1, s)
    assert cdh.transition_value(pp, s, t, src, cdh.x_v(-1.6, 0, t)) == 0.0
    assert cdh.transition_value(pp, s, t, src, cdh.x_v(-1.6, 1, t)) > 0


def test_chapman_kolmogorov_atomic():
    rep = cdh.check_consistency(cdh.CdhProcessParams(2.0, -0.6), 0.2, 0.7, 1.1, [0.5, 3.0])
    assert rep.max_residual <= 1e-6

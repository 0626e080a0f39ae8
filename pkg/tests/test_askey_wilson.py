import math

import numpy as np
import pytest

from kpzopen import askey_wilson as aw
from kpzopen import measure as ms
from kpzopen.asep import BoundaryParams, laplace_exact, model_from_uv, stationary_exact
from kpzopen.cdh import CdhProcessParams, atom_grid, marginal_density
from kpzopen.query import LaplaceQuery, NestingError

SPEC = ms.QuadratureSpec()


def pp_for(u, v, N):
    return aw.AwProcessParams.from_model(model_from_uv(N, BoundaryParams(u, v)))


def test_no_atoms_inside_unit_disc():
    mu = aw.aw_measure(aw.AwParams(0.5, -0.3, 0.4, -0.2, 0.5))
    assert mu.atoms == ()
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, abs=1e-6)


def test_atomic_measure():
    mu = aw.aw_measure(aw.AwParams(1.4, -0.3, 0.4, -0.2, 0.5))
    assert [a.location for a in mu.atoms] == pytest.approx([0.5 * (1.4 + 1 / 1.4)])
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, abs=1e-6)


def test_complex_pair_measure():
    z = 0.6 * np.exp(0.7j)
    mu = aw.aw_measure(aw.AwParams(z, np.conj(z), 1.8, -0.4, 0.45))
    assert len(mu.atoms) >= 1
    assert ms.total_mass(mu, SPEC) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("p", [aw.AwParams(2.0, 0.6, 0.3, 0.1, 0.5), aw.AwParams(0.5j, 0.5, 0.2, 0.1, 0.5),
                               aw.AwParams(0.5, 0.3, 0.2, 0.1, 1.2)])
def test_inadmissible(p):
    with pytest.raises(aw.AdmissibilityError):
        aw.aw_measure(p)


def test_marginal_substitution():
    pp = pp_for(1.0, 0.5, 16)
    m = aw.aw_marginal(pp, 1.0)
    ref = aw.aw_measure(aw.AwParams(pp.A, pp.B, pp.C, pp.D, pp.q))
    x = np.linspace(-0.9, 0.9, 7)
    np.testing.assert_allclose(m.density(x), ref.density(x), rtol=1e-14)
    assert ms.total_mass(m, SPEC) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("u, v, s", [(1.0, 0.5, 1.0), (2.0, -0.6, 0.9), (-0.5, 1.0, 0.3), (1.5, -0.3, 1.2)])
def test_marginal_atoms_rule(u, v, s):
    pp = pp_for(u, v, 16)
    m = aw.aw_marginal(pp, s)
    assert bool(m.atoms) == (pp.A * math.sqrt(s) > 1 or pp.C / math.sqrt(s) > 1)


def test_transition_pair_and_mass():
    pp = pp_for(1.0, 0.5, 16)
    k = aw.AwTransitionKernel(pp, 0.5, 1.0)
    p = k.params(0.2)
    assert complex(p.c) == pytest.approx(np.conj(complex(p.d)))
    assert abs(complex(p.c)) == pytest.approx(math.sqrt(0.5))
    assert ms.total_mass(aw.aw_transition(pp, 0.5, 1.0, 0.2), SPEC) == pytest.approx(1.0, abs=1e-6)


def test_transition_outside_support():
    pp = pp_for(1.0, 0.5, 16)
    with pytest.raises(aw.AdmissibilityError):
        aw.aw_transition(pp, 0.5, 1.0, 1.5)


def test_degenerate_transition_from_a_atom():
    # out of an atom generated by A sqrt(s), a d q^j = 1: purely atomic, mass 1
    pp = pp_for(2.0, -0.6, 16)
    s, t = 0.7, 1.0
    atoms = aw.aw_marginal(pp, s).atoms
    assert atoms
    mu = aw.aw_transition(pp, s, t, atoms[0].location)
    assert not mu.has_density
    assert sum(a.mass for a in mu.atoms) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("u, v, times", [(1.0, 0.5, (0.4, 0.7, 1.0)), (-0.5, 1.0, (0.4, 0.7, 1.0)),
                                         (2.0, -0.6, (0.75, 0.85, 0.95)), (3.0, -1.4, (0.4, 0.7, 1.0))])
def test_chapman_kolmogorov(u, v, times):
    res = aw.aw_check_consistency(pp_for(u, v, 16), *times, [-0.8, -0.3, 0.0, 0.5, 0.95])
    assert res <= 1e-6


@pytest.mark.parametrize("N, u, v, X, c", [(4, 1.0, 0.5, (0.5,), (0.3,)), (5, 0.6, 0.9, (0.4, 1.0), (0.5, 0.25))])
def test_phi_n_matches_exact(N, u, v, X, c):
    bp = BoundaryParams(u, v)
    q = LaplaceQuery(X, c)
    exact = laplace_exact(stationary_exact(model_from_uv(N, bp)), q)
    assert aw.phi_n(bp, N, q, aw.default_aw_spec(N)) == pytest.approx(exact, abs=1e-6)


def test_phi_n_zero_c_and_guards():
    bp = BoundaryParams(1.0, 0.5)
    assert aw.phi_n(bp, 6, LaplaceQuery((0.5,), (0.0,))) == 1.0
    with pytest.raises(NestingError):
        aw.phi_n(bp, 6, LaplaceQuery((0.2, 0.5, 0.9), (0.1, 0.1, 0.1)))
    with pytest.raises(aw.AdmissibilityError):
        aw.phi_n(BoundaryParams(0.3, -0.5), 6, LaplaceQuery((0.5,), (0.2,)))


def test_phi_n_log_convex_in_c():
    # H takes both signs, so the transform is log-convex in c rather than monotone
    bp = BoundaryParams(1.0, 0.5)
    cs = np.linspace(0.1, 2.1, 6)
    lv = np.log([aw.phi_n(bp, 8, LaplaceQuery((0.5,), (c,))) for c in cs])
    assert np.all(np.diff(lv, 2) > 0)
    assert lv[1] < lv[0]


def test_scaled_density_converges():
    bp = BoundaryParams(1.0, 0.5)
    ref = marginal_density(CdhProcessParams(1.0, 0.5), 0.5, 1.0)
    errs = [abs(aw.scaled_marginal_density(bp, N, 0.5, 1.0) - ref) for N in (100, 1000, 10000)]
    assert errs[0] > errs[1] > errs[2]
    assert aw.scaled_marginal_density(bp, 100, 0.5, 0.0) == 0.0


def test_scaled_atoms_converge():
    bp = BoundaryParams(2.0, -0.6)
    g = atom_grid(CdhProcessParams(2.0, -0.6), 0.5)
    at = aw.scaled_marginal_atoms(bp, 10000, 0.5)
    assert len(at) == len(g.locations)
    for (x, m), x0, lm in zip(sorted(at), sorted(g.locations), g.log_masses):
        assert x == pytest.approx(x0, rel=1e-2)
        assert m == pytest.approx(math.exp(lm), rel=1e-2)

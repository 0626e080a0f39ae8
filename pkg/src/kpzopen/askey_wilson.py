"""Askey-Wilson distributions and process, the finite-N Laplace transform of the
open ASEP height profile, and rescaled-marginal diagnostics near x = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import measure as ms
from .measure import Atom, MixedMeasure, QuadratureSpec
from .query import LaplaceQuery, NestingError
from .specfun import log_abs_qpoch_polar_sq, log_qpoch_inf


class AdmissibilityError(ValueError):
    pass


@dataclass(frozen=True)
class AwParams:
    a: complex
    b: complex
    c: complex
    d: complex
    q: float

    @property
    def params(self) -> tuple:
        return (complex(self.a), complex(self.b), complex(self.c), complex(self.d))


def _bad_product(z: complex, tol: float = 1e-14) -> bool:
    return abs(z.imag) <= tol * max(1.0, abs(z)) and z.real >= 1.0 - 1e-12


def check_admissible(p: AwParams) -> None:
    if not -1 < p.q < 1:
        raise AdmissibilityError(f"q = {p.q} outside (-1, 1)")
    a, b, c, d = p.params
    q = p.q
    prods = {"ac": a * c, "ad": a * d, "bc": b * c, "bd": b * d, "abcd": a * b * c * d}
    for name, z in list(prods.items()):
        prods["q" + name] = q * z
    for name, z in prods.items():
        if _bad_product(z):
            raise AdmissibilityError(f"{name} = {z} lies in [1, inf)")
    # reality structure: all real, or conjugate pairs
    reals = [abs(z.imag) < 1e-14 for z in (a, b, c, d)]
    if not all(reals):
        cplx = [z for z, r in zip((a, b, c, d), reals) if not r]
        if len(cplx) % 2 or not all(any(abs(z - w.conjugate()) < 1e-12 for w in cplx) for z in cplx):
            raise AdmissibilityError("complex parameters must come in conjugate pairs")


def _log_positive(logz: complex, what: str) -> float:
    """Real log of a product known to be real; raise if it is not positive."""
    ph = math.remainder(logz.imag, 2 * math.pi)
    if abs(ph) > 1e-6:
        raise AdmissibilityError(f"{what} is not positive (phase {logz.imag})")
    return float(logz.real)


def _lqp(z, q) -> complex:
    return complex(log_qpoch_inf(complex(z), q))


def aw_log_norm(p: AwParams) -> float:
    """log of (q, ab, ac, ad, bc, bd, cd)_inf / (2 pi (abcd)_inf)."""
    a, b, c, d = p.params
    q = p.q
    tot = _lqp(q, q)
    for z in (a * b, a * c, a * d, b * c, b * d, c * d):
        tot += _lqp(z, q)
    tot -= _lqp(a * b * c * d, q)
    return _log_positive(tot, "AW normalization") - math.log(2 * math.pi)


def _log_chart_density_factory(p: AwParams):
    """theta -> log(AW^c(cos theta) sin theta)."""
    lnorm = aw_log_norm(p)
    q = p.q
    pars = [(abs(z), math.atan2(z.imag, z.real)) for z in p.params]

    def lcd(theta):
        theta = np.asarray(theta, dtype=float)
        out = lnorm + log_abs_qpoch_polar_sq(1.0, 2.0 * theta, q)
        for r, arg in pars:
            out = out - log_abs_qpoch_polar_sq(r, theta + arg, q)
        return out

    return lcd


def _atom_log_masses(p: AwParams, only: Optional[int] = None, jmax: Optional[int] = None) -> list[tuple[float, float]]:
    """Atoms of AW(p); `only`/`jmax` restrict to the first jmax+1 atoms of one parameter."""
    q = p.q
    ps = p.params
    out = []
    for idx, chi in enumerate(ps):
        if abs(chi) <= 1 or (only is not None and idx != only):
            continue
        if abs(chi.imag) > 1e-14:
            raise AdmissibilityError("parameter of modulus > 1 must be real")
        chi = chi.real
        others = [complex(z) for i, z in enumerate(ps) if i != idx]
        o1, o2, o3 = others
        lm0 = (_lqp(chi ** -2, q) + _lqp(o1 * o2, q) + _lqp(o1 * o3, q) + _lqp(o2 * o3, q)
               - _lqp(o1 / chi, q) - _lqp(o2 / chi, q) - _lqp(o3 / chi, q) - _lqp(chi * o1 * o2 * o3, q))
        j = 0
        while abs(chi * q ** j) >= 1 and (jmax is None or j <= jmax):
            if j == 0:
                lm = lm0
            else:
                # ratio written so that a vanishing parameter causes no 0/0
                num = 1.0 + 0j
                for i in range(j):
                    num *= (1 - chi * chi * q ** i) * (1 - chi * o1 * q ** i) * (1 - chi * o2 * q ** i) * (1 - chi * o3 * q ** i)
                    num /= (1 - q ** (i + 1))
                    num /= (o1 - q ** (i + 1) * chi) * (o2 - q ** (i + 1) * chi) * (o3 - q ** (i + 1) * chi)
                num *= (1 - chi * chi * q ** (2 * j)) / (1 - chi * chi) * (q / chi) ** j
                if num == 0:
                    raise AdmissibilityError("vanishing atom mass")
                lm = lm0 + complex(np.log(num))
            loc = 0.5 * (chi * q ** j + 1.0 / (chi * q ** j))
            out.append((loc, _log_positive(lm, f"atom mass at {loc}")))
            j += 1
            if j > 10000:
                raise AdmissibilityError("too many atoms")
    return out


def aw_measure(p: AwParams) -> MixedMeasure:
    check_admissible(p)
    lcd = _log_chart_density_factory(p)

    def ld(x):
        x = np.asarray(x, dtype=float)
        th = np.arccos(np.clip(x, -1, 1))
        with np.errstate(divide="ignore"):
            return lcd(th) - np.log(np.sin(th))

    atoms = tuple(Atom(loc, lm) for loc, lm in sorted(_atom_log_masses(p)))
    return MixedMeasure(-1.0, 1.0, ld, atoms, True, "cos", lcd, {"aw": p})


# ---------------------------------------------------------------- process

@dataclass(frozen=True)
class AwProcessParams:
    A: float
    B: float
    C: float
    D: float
    q: float

    def __post_init__(self):
        if not (self.A > 0 and self.C > 0 and -1 < self.B <= 0 and -1 < self.D <= 0):
            raise AdmissibilityError("need A, C > 0 and B, D in (-1, 0]")
        if not self.A * self.C < 1:
            raise AdmissibilityError("need AC < 1")

    @classmethod
    def from_model(cls, model) -> "AwProcessParams":
        return cls(model.A, model.B, model.C, model.D, model.q)


def marginal_params(pp: AwProcessParams, s: float) -> AwParams:
    rs = math.sqrt(s)
    return AwParams(pp.A * rs, pp.B * rs, pp.C / rs, pp.D / rs, pp.q)


def aw_marginal(pp: AwProcessParams, s: float) -> MixedMeasure:
    if not s > 0:
        raise AdmissibilityError("time must be > 0")
    return aw_measure(marginal_params(pp, s))


def _split_point(x: float) -> tuple[complex, complex]:
    if abs(x) <= 1:
        th = math.acos(x)
        return complex(math.cos(th), math.sin(th)), complex(math.cos(th), -math.sin(th))
    r = math.sqrt(x * x - 1)
    return complex(x + r), complex(x - r)


class AwTransitionKernel:
    """x -> AW transition from time s to time t, with a batched density evaluator."""

    def __init__(self, pp: AwProcessParams, s: float, t: float):
        if not 0 < s < t:
            raise AdmissibilityError("need 0 < s < t")
        self.pp, self.s, self.t = pp, s, t
        self.rho = math.sqrt(s / t)
        self.a = pp.A * math.sqrt(t)
        self.b = pp.B * math.sqrt(t)
        self._support = aw_marginal(pp, s)
        # atoms generated by A sqrt(s) at time s: y_j = (chi q^j + 1/(chi q^j))/2
        chi = pp.A * math.sqrt(s)
        self._a_atoms = []
        j = 0
        while chi * pp.q ** j >= 1:
            z = chi * pp.q ** j
            self._a_atoms.append(0.5 * (z + 1 / z))
            j += 1

    def a_atom_index(self, x: float) -> Optional[int]:
        for j, y in enumerate(self._a_atoms):
            if abs(x - y) <= 1e-9 * max(1.0, abs(y)):
                return j
        return None

    def _from_a_atom(self, x: float, j: int) -> MixedMeasure:
        # here a d q^j = 1, so (ad; q)_inf = 0: no density, and only the atoms
        # y^a_k(t), k <= j, keep positive mass
        p = self.params(x)
        atoms = tuple(Atom(loc, lm) for loc, lm in sorted(_atom_log_masses(p, only=0, jmax=j)))
        tot = sum(a.mass for a in atoms)
        if abs(tot - 1) > 1e-8:
            raise AdmissibilityError(f"degenerate transition from {x} has mass {tot}")
        return MixedMeasure(0.0, 0.0, None, atoms, True, meta={"aw": p, "degenerate": j})

    def params(self, x: float) -> AwParams:
        e1, e2 = _split_point(x)
        return AwParams(self.a, self.b, self.rho * e1, self.rho * e2, self.pp.q)

    def _in_support(self, x: float) -> bool:
        if -1 <= x <= 1:
            return True
        return any(abs(x - at.location) <= 1e-9 * max(1, abs(x)) for at in self._support.atoms)

    def __call__(self, x: float) -> MixedMeasure:
        if not self._in_support(x):
            raise AdmissibilityError(f"x = {x} outside the support at time {self.s}")
        j = self.a_atom_index(x)
        if j is not None:
            return self._from_a_atom(x, j)
        return aw_measure(self.params(x))

    def describe(self, x: float) -> MixedMeasure:
        """Support and atoms of the kernel at x; the density is left to the matrix evaluator."""
        if not self._in_support(x):
            raise AdmissibilityError(f"x = {x} outside the support at time {self.s}")
        j = self.a_atom_index(x)
        if j is not None:
            return self._from_a_atom(x, j)
        p = self.params(x)
        check_admissible(p)
        atoms = tuple(Atom(loc, lm) for loc, lm in sorted(_atom_log_masses(p)))
        return MixedMeasure(-1.0, 1.0, None, atoms, True, "cos", lambda t: np.zeros(np.shape(t)), {"aw": p})

    def log_chart_density_matrix(self, xs, is_atom, theta):
        xs = np.asarray(xs, dtype=float)
        theta = np.asarray(theta, dtype=float)
        q, a, b, rho = self.pp.q, self.a, self.b, self.rho
        out = np.empty((len(xs), len(theta)))
        # target-only factors
        common = (log_abs_qpoch_polar_sq(1.0, 2 * theta, q) - log_abs_qpoch_polar_sq(a, theta, q)
                  - log_abs_qpoch_polar_sq(b, theta, q))
        cont = np.abs(xs) <= 1
        if np.any(cont):
            thx = np.arccos(xs[cont])
            base = (_lqp(q, q) + _lqp(a * b, q) + _lqp(rho * rho, q) - _lqp(a * b * rho * rho, q)).real
            lnorm = (base + log_abs_qpoch_polar_sq(a * rho, thx, q) + log_abs_qpoch_polar_sq(b * rho, thx, q)
                     - math.log(2 * math.pi))
            tp = theta[None, :] + thx[:, None]
            tm = theta[None, :] - thx[:, None]
            out[cont] = (lnorm[:, None] + common[None, :] - log_abs_qpoch_polar_sq(rho, tp, q)
                         - log_abs_qpoch_polar_sq(rho, tm, q))
        for i in np.flatnonzero(~cont):
            out[i] = _log_chart_density_factory(self.params(float(xs[i])))(theta)
        return out


def aw_transition(pp: AwProcessParams, s: float, t: float, x: float) -> MixedMeasure:
    return AwTransitionKernel(pp, s, t)(x)


# ---------------------------------------------------------------- phi^(N)

def default_aw_spec(N: int) -> QuadratureSpec:
    # resolution in theta must follow the 1/sqrt(N) scale near x = 1
    return QuadratureSpec(panels=int(12 + 2.5 * math.sqrt(N)), nodes_per_panel=32, grading=0, rel_tol=1e-15)


def _log_power(n: int, shift: float):
    def f(y):
        y = np.asarray(y, dtype=float)
        if n == 0:
            return np.zeros_like(y)
        base = shift + y
        if np.any(base < 0):
            raise ValueError("negative base in (cosh + y)^n")
        with np.errstate(divide="ignore"):
            return n * np.log(base)
    return f


def _process_params(bp, N: int) -> AwProcessParams:
    from .asep import model_from_uv
    return AwProcessParams.from_model(model_from_uv(N, bp))


def phi_n(bp, N: int, query: LaplaceQuery, spec: Optional[QuadratureSpec] = None) -> float:
    """Laplace transform of the rescaled stationary height profile at size N via the AW process."""
    if not bp.u + bp.v > 0:
        raise AdmissibilityError("phi_n needs u + v > 0")
    q_ = query.merged()
    if q_.d == 0:
        return 1.0
    if q_.d > 2:
        raise NestingError("phi_n supports d <= 2")
    spec = spec or default_aw_spec(N)
    pp = _process_params(bp, N)
    sq = math.sqrt(N)
    ns = [0] + [int(math.floor(N * x + 1e-9)) for x in q_.X] + [N]
    s = list(q_.s) + [0.0]
    times = [math.exp(-2 * sk / sq) for sk in s]
    mu = aw_marginal(pp, times[0]).tilt(_log_power(ns[1] - ns[0], math.cosh(s[0] / sq)))
    for k in range(1, len(times)):
        ker = AwTransitionKernel(pp, times[k - 1], times[k])
        mu = ms.chain(mu, ker, spec).tilt(_log_power(ns[k + 1] - ns[k], math.cosh(s[k] / sq)))
    log_num = ms.log_integrate(mu, None, spec)
    log_den = ms.log_integrate(aw_marginal(pp, 1.0), _log_power(N, 1.0), spec)
    return math.exp(log_num - log_den)


# ---------------------------------------------------------------- scaled diagnostics

def scaled_marginal_params(bp, N: int, t: float) -> AwParams:
    pp = _process_params(bp, N)
    return marginal_params(pp, pp.q ** t)


def scaled_marginal_density(bp, N: int, t: float, r) -> np.ndarray:
    """N^{u+v} (1/2N) AW^c_{q^t}(1 - r/2N), evaluated through theta = 2 arcsin(sqrt(r/4N))."""
    if not -2 < t < 2:
        raise ValueError("t must lie in (-2, 2)")
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r > 4 * N):
        raise ValueError("r must lie in [0, 4N]")
    p = scaled_marginal_params(bp, N, t)
    check_admissible(p)
    lcd = _log_chart_density_factory(p)
    th = 2 * np.arcsin(np.sqrt(r / (4.0 * N)))
    # density in x is chart density / sin(theta); dx/dr = 1/2N
    with np.errstate(divide="ignore", invalid="ignore"):
        val = lcd(th) - np.log(np.sin(th)) + (bp.u + bp.v) * math.log(N) - math.log(2.0 * N)
    # r = 0: the x-density vanishes like theta there
    out = np.where(th == 0, 0.0, np.exp(val))
    return out[()] if out.ndim == 0 else out


def scaled_marginal_atoms(bp, N: int, t: float) -> list[tuple[float, float]]:
    """[(-2N(y - 1), N^{u+v} mass)] for the atoms of the time-q^t marginal."""
    p = scaled_marginal_params(bp, N, t)
    m = aw_measure(p)
    scale = (bp.u + bp.v) * math.log(N)
    return [(-2.0 * N * (a.location - 1.0), math.exp(a.log_mass + scale)) for a in m.atoms]


# ---------------------------------------------------------------- consistency

def aw_check_consistency(pp: AwProcessParams, s: float, t: float, w: float, probes: Sequence[float],
                         spec: Optional[QuadratureSpec] = None, sources: Sequence[float] = (0.3,)) -> float:
    """Max relative residual of the two Chapman-Kolmogorov identities at probe points.

    Probes in (-1, 1) compare densities; atoms of the target measures are added
    and compare masses. Sources are starting points for the transition identity
    (atoms of the time-s marginal are added).
    """
    if not 0 < s < t < w:
        raise AdmissibilityError("need 0 < s < t < w")
    spec = spec or QuadratureSpec(panels=64, grading=8)
    res = 0.0

    def compare(nu: MixedMeasure, ref: MixedMeasure) -> float:
        worst = 0.0
        xs = np.array([p for p in probes if -1 < p < 1])
        if len(xs):
            a, b = nu.density(xs), ref.density(xs)
            if ref.has_density:
                worst = max(worst, float(np.max(np.abs(a - b) / np.abs(b))))
            else:
                worst = max(worst, float(np.max(np.abs(a))))
        for at in ref.atoms:
            worst = max(worst, abs(nu.atom_mass(at.location) - at.mass) / at.mass)
        for at in nu.atoms:
            if ref.atom_mass(at.location) == 0 and at.mass > 1e-14:
                worst = max(worst, 1.0)
        return worst

    res = max(res, compare(ms.chain(aw_marginal(pp, s), AwTransitionKernel(pp, s, t), spec), aw_marginal(pp, t)))
    k_st, k_tw, k_sw = AwTransitionKernel(pp, s, t), AwTransitionKernel(pp, t, w), AwTransitionKernel(pp, s, w)
    for x in list(sources) + [a.location for a in aw_marginal(pp, s).atoms]:
        res = max(res, compare(ms.chain(k_st(x), k_tw, spec), k_sw(x)))
    return res

"""Continuous dual Hahn (CDH) and Wilson orthogonality measures, and the CDH
process: marginals p_s (infinite mass), transitions p_{s,t} and numeric
Chapman-Kolmogorov checks.

Densities live on (0, inf) in the chart t = sqrt(x); the Gamma arguments are
then p + i t/2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import measure as ms
from .measure import Atom, MixedMeasure, QuadratureSpec
from .specfun import log_abs_gamma_sq_line, log_gamma, log_gamma_real_signed, log_inv_abs_gamma_iy_sq

INT_TOL = 1e-12
LOC_TOL = 1e-9
LOG_4PI = math.log(4 * math.pi)


class CdhError(ValueError):
    pass


class AdmissibilityError(CdhError):
    pass


class SupportError(CdhError):
    pass


class TimeRangeError(CdhError):
    pass


# ---------------------------------------------------------------- helpers

def _is_real(z: complex) -> bool:
    return abs(complex(z).imag) <= 1e-14 * max(1.0, abs(z))


def _conj_pair(b: complex, c: complex) -> bool:
    b, c = complex(b), complex(c)
    return not _is_real(b) and abs(b - c.conjugate()) <= 1e-13 * max(1.0, abs(b))


def _log_real_gamma_ratio(num: Sequence[complex], den: Sequence[complex]) -> tuple[float, float]:
    """(log|P|, sign P) for P = prod Gamma(num) / prod Gamma(den), known to be real."""
    tot = 0j
    for z in num:
        tot += _lg(z)
    for z in den:
        tot -= _lg(z)
    ph = math.remainder(tot.imag, 2 * math.pi)
    if abs(abs(ph) - math.pi) < 1e-8:
        return tot.real, -1.0
    if abs(ph) > 1e-8:
        raise AdmissibilityError(f"Gamma product is not real (phase {ph})")
    return tot.real, 1.0


def _lg(z: complex) -> complex:
    z = complex(z)
    if _is_real(z):
        lv, sg = log_gamma_real_signed(z.real)
        return complex(lv, 0.0 if sg > 0 else math.pi)
    return complex(log_gamma(z))


def _poch(x: complex, j: int) -> complex:
    out = 1 + 0j
    for i in range(j):
        out *= x + i
    return out


def _log_positive(val: complex, what: str) -> float:
    if abs(val.imag) > 1e-9 * max(abs(val), 1e-300):
        raise AdmissibilityError(f"{what} is not real: {val}")
    if not val.real > 0:
        raise AdmissibilityError(f"{what} is not positive: {val.real}")
    return math.log(val.real)


def _line(p: complex, t):
    """log |Gamma(p + i t/2)|^2 on the chart grid t."""
    p = complex(p)
    return log_abs_gamma_sq_line(p.real, p.imag + 0.5 * np.asarray(t, dtype=float))


def _near(x: float, locs: Sequence[float]) -> Optional[int]:
    for i, l0 in enumerate(locs):
        if abs(x - l0) <= LOC_TOL * max(1.0, abs(l0)):
            return i
    return None


def natural_frame(a: float, count: int) -> list[float]:
    return [-4.0 * (a + j) ** 2 for j in range(count)]


# ---------------------------------------------------------------- CDH measure

@dataclass(frozen=True)
class CdhCase:
    tag: str
    a: float
    b: complex
    c: complex
    atom_frame: tuple = ()
    k: Optional[int] = None  # a + b = -k in case N2


def classify_cdh(a: float, b: complex, c: complex, frame: Optional[Sequence[float]] = None) -> CdhCase:
    """Pick case P / N1 / N2; the atom frame defaults to x_j = -4(a+j)^2, j = 0..floor(-a)."""
    a = float(a)
    b, c = complex(b), complex(c)
    pair = _conj_pair(b, c)
    real_bc = _is_real(b) and _is_real(c)
    if not (pair or real_bc):
        raise AdmissibilityError("b, c must be a conjugate pair or both real")
    if pair and not b.real > 0:
        raise AdmissibilityError("conjugate pair needs Re(b) > 0")
    if a >= 0:
        if real_bc and not (b.real > 0 and c.real > 0):
            raise AdmissibilityError("case P needs b, c > 0")
        return CdhCase("P", a, b, c, ())
    n = math.floor(-a) + 1
    nat = natural_frame(a, n)
    fr = tuple(nat) if frame is None else tuple(sorted(float(x) for x in frame))
    if frame is not None:
        missing = [x for x in nat if _near(x, fr) is None and not (x == 0.0)]
        if missing:
            raise AdmissibilityError(f"atom frame does not contain {missing}")
    if pair or (real_bc and a + b.real > 0 and a + c.real > 0):
        return CdhCase("N1", a, b, c, fr)
    br, cr = b.real, c.real
    kf = -(a + br)
    k = round(kf)
    if real_bc and abs(kf - k) < INT_TOL and k >= 0 and br > 0 and br + cr > 0 and cr - a > 0:
        return CdhCase("N2", a, complex(-a - k), c, fr, int(k))
    raise AdmissibilityError(
        f"(a, b, c) = ({a}, {b}, {c}) satisfies none of P (a >= 0), N1 (a+b, a+c > 0 or pair), "
        "N2 (a+b = -k, b, b+c, c-a > 0)")


def cdh_log_norm(a: float, b: complex, c: complex) -> float:
    lv, sg = _log_real_gamma_ratio([], [a + b, a + c, b + c])
    if sg < 0:
        raise AdmissibilityError("CDH normalization is negative")
    return lv - LOG_4PI


def cdh_log_chart_density(a: float, b: complex, c: complex):
    """t -> log of the CDH density times dx/dt at x = t^2."""
    lnorm = cdh_log_norm(a, b, c)

    def f(t):
        t = np.asarray(t, dtype=float)
        return lnorm + _line(a, t) + _line(b, t) + _line(c, t) + log_inv_abs_gamma_iy_sq(t)

    return f


def cdh_atom_masses(case: CdhCase) -> list[tuple[float, float]]:
    """(location, log mass) for the atoms of case N1 / N2 (zero masses dropped)."""
    if case.tag == "P":
        return []
    a, b, c = case.a, case.b, case.c
    jmax = case.k if case.tag == "N2" else math.floor(-a)
    lg, sg = _log_real_gamma_ratio([b - a, c - a], [-2 * a, b + c])
    out = []
    for j in range(jmax + 1):
        if a + j == 0:
            continue
        r = (_poch(2 * a, j) * _poch(a + b, j) * _poch(a + c, j)
             / (_poch(1, j) * _poch(a - b + 1, j) * _poch(a - c + 1, j)) * (a + j) / a * (-1) ** j)
        if r == 0:
            continue
        lm = _log_positive(sg * r, f"CDH atom mass (j = {j})") + lg
        out.append((-4.0 * (a + j) ** 2, lm))
    return out


def cdh_measure(case: CdhCase) -> MixedMeasure:
    atoms = tuple(Atom(l0, lm) for l0, lm in sorted(cdh_atom_masses(case)))
    meta = {"cdh": case}
    if case.tag == "N2":
        return MixedMeasure(0.0, 0.0, None, atoms, True, meta=meta)
    lcd = cdh_log_chart_density(case.a, case.b, case.c)
    return MixedMeasure(0.0, math.inf, None, atoms, True, "sqrt", lcd, meta)


def cdh(a: float, b: complex, c: complex, frame: Optional[Sequence[float]] = None) -> MixedMeasure:
    return cdh_measure(classify_cdh(a, b, c, frame))


# ---------------------------------------------------------------- Wilson

def classify_wilson(a: complex, b: complex, c: complex, d: complex) -> str:
    a, b, c, d = map(complex, (a, b, c, d))
    cd_ok = (_conj_pair(c, d) and c.real > 0) or (_is_real(c) and _is_real(d) and c.real > 0 and d.real > 0)
    if _conj_pair(a, b):
        if a.real > 0 and cd_ok:
            return "P2"
        raise AdmissibilityError("case P2 needs Re(a) > 0 and (c, d) a pair or positive reals")
    if not (_is_real(a) and _is_real(b) and b.real > 0):
        raise AdmissibilityError("a, b must be a conjugate pair or a real with b > 0")
    ar, br = a.real, b.real
    if ar >= 0:
        if cd_ok:
            return "P1"
        raise AdmissibilityError("case P1 needs (c, d) a pair or positive reals")
    kf = -(ar + br)
    if (abs(kf - round(kf)) < INT_TOL and round(kf) >= 0 and _is_real(c) and _is_real(d)
            and br + c.real > 0 and br + d.real > 0 and c.real - ar > 0 and d.real - ar > 0):
        return "N2"
    if (_conj_pair(c, d) and c.real > 0) or (_is_real(c) and _is_real(d) and ar + c.real > 0 and ar + d.real > 0):
        return "N1"
    raise AdmissibilityError(f"Wilson parameters ({a}, {b}, {c}, {d}) fit none of P1/P2/N1/N2")


def wilson_log_chart_density(a, b, c, d):
    ps = [complex(z) for z in (a, b, c, d)]
    s = sum(ps)
    lk, sg = _log_real_gamma_ratio([s], [ps[0] + ps[1], ps[0] + ps[2], ps[1] + ps[2], ps[0] + ps[3],
                                         ps[1] + ps[3], ps[2] + ps[3]])
    if sg < 0:
        raise AdmissibilityError("Wilson normalization is negative")
    lnorm = lk - LOG_4PI

    def f(t):
        t = np.asarray(t, dtype=float)
        out = lnorm + log_inv_abs_gamma_iy_sq(t)
        for p in ps:
            out = out + _line(p, t)
        return out

    return f


def wilson_measure(a, b, c, d, frame: Optional[Sequence[float]] = None) -> MixedMeasure:
    tag = classify_wilson(a, b, c, d)
    meta = {"wilson": (tag, a, b, c, d)}
    atoms: list[Atom] = []
    if tag in ("N1", "N2"):
        a = float(complex(a).real)
        b, c, d = complex(b), complex(c), complex(d)
        jmax = round(-(a + b.real)) if tag == "N2" else math.floor(-a)
        nat = natural_frame(a, math.floor(-a) + 1)
        if frame is not None:
            missing = [x for x in nat if _near(x, frame) is None]
            if missing:
                raise AdmissibilityError(f"atom frame does not contain {missing}")
        lg, sg = _log_real_gamma_ratio([a + b + c + d, b - a, c - a, d - a], [-2 * a, b + c, c + d, b + d])
        for j in range(jmax + 1):
            if a + j == 0:
                continue
            r = (_poch(2 * a, j) * _poch(a + b, j) * _poch(a + c, j) * _poch(a + d, j)
                 / (_poch(1, j) * _poch(a - b + 1, j) * _poch(a - c + 1, j) * _poch(a - d + 1, j)) * (a + j) / a)
            if r == 0:
                continue
            atoms.append(Atom(-4.0 * (a + j) ** 2, _log_positive(sg * r, f"Wilson atom mass (j = {j})") + lg))
    atoms = tuple(sorted(atoms, key=lambda at: at.location))
    if tag == "N2":
        return MixedMeasure(0.0, 0.0, None, atoms, True, meta=meta)
    return MixedMeasure(0.0, math.inf, None, atoms, True, "sqrt", wilson_log_chart_density(a, b, c, d), meta)


# ---------------------------------------------------------------- CDH process

@dataclass(frozen=True)
class CdhProcessParams:
    u: float
    v: float

    def __post_init__(self):
        if not self.u + self.v > 0:
            raise AdmissibilityError("the CDH process needs u + v > 0")

    @property
    def c_uv(self) -> float:
        return 2.0 if (self.u <= 0 or self.u >= 1) else 2.0 * self.u

    def c_duv(self, d: int) -> float:
        return self.c_uv / d

    def check_time(self, s: float) -> None:
        if not 0 <= s < self.c_uv:
            raise TimeRangeError(f"time {s} outside [0, {self.c_uv})")


@dataclass(frozen=True)
class CdhAtomGrid:
    flavor: str  # "u", "v" or "none"
    locations: tuple = ()
    log_masses: tuple = ()

    def index(self, x: float) -> Optional[int]:
        return _near(x, self.locations)


def x_u(u: float, j: int, s: float) -> float:
    return -4.0 * (u + j - s / 2) ** 2


def x_v(v: float, j: int, s: float) -> float:
    return -4.0 * (v + j + s / 2) ** 2


def atom_grid(pp: CdhProcessParams, s: float) -> CdhAtomGrid:
    """Discrete support of p_s with masses; exactly one flavor (or none)."""
    pp.check_time(s)
    u, v = pp.u, pp.v
    if u - s / 2 < 0:
        jmax = math.floor(-u + s / 2)
        lg, sg = _log_real_gamma_ratio([v - u + s, v + u + 2], [-2 * u + s])
        locs, lms = [], []
        for j in range(jmax + 1):
            r = (u + j - s / 2) * _poch(2 * u - s, j) * _poch(v + u, j) / ((u - s / 2) * _poch(1, j) * _poch(1 - v + u - s, j))
            if r == 0:
                continue
            locs.append(x_u(u, j, s))
            lms.append(_log_positive(sg * r, f"u-atom mass (j = {j})") + lg)
        return CdhAtomGrid("u", tuple(locs), tuple(lms))
    if v + s / 2 < 0:
        jmax = math.floor(-v - s / 2)
        lg, sg = _log_real_gamma_ratio([u - v - s, 2 + v + u], [-2 * v - s])
        locs, lms = [], []
        for j in range(jmax + 1):
            r = (v + j + s / 2) * _poch(2 * v + s, j) * _poch(v + u, j) / ((v + s / 2) * _poch(1, j) * _poch(1 - u + v + s, j))
            if r == 0:
                continue
            locs.append(x_v(v, j, s))
            lms.append(_log_positive(sg * r, f"v-atom mass (j = {j})") + lg)
        return CdhAtomGrid("v", tuple(locs), tuple(lms))
    return CdhAtomGrid("none")


def marginal_log_chart_density(pp: CdhProcessParams, s: float):
    u, v = pp.u, pp.v
    pref = math.log((u + v) * (u + v + 1)) - LOG_4PI

    def f(t):
        t = np.asarray(t, dtype=float)
        return pref + _line(s / 2 + v, t) + _line(-s / 2 + u, t) + log_inv_abs_gamma_iy_sq(t)

    return f


def marginal_density(pp: CdhProcessParams, s: float, r) -> np.ndarray:
    """Density of the continuous part of p_s at r > 0 (zero for r <= 0)."""
    pp.check_time(s)
    r = np.asarray(r, dtype=float)
    out = np.zeros(r.shape)
    pos = r > 0
    t = np.sqrt(r[pos])
    out[pos] = np.exp(marginal_log_chart_density(pp, s)(t)) / (2 * t)
    return out


def marginal(pp: CdhProcessParams, s: float) -> MixedMeasure:
    """p_s as a MixedMeasure flagged is_probability = False (infinite total mass)."""
    g = atom_grid(pp, s)
    atoms = tuple(sorted((Atom(l0, lm) for l0, lm in zip(g.locations, g.log_masses)), key=lambda a: a.location))
    return MixedMeasure(0.0, math.inf, None, atoms, False, "sqrt", marginal_log_chart_density(pp, s),
                        {"cdh_marginal": (pp, s)})


def marginal_value(pp: CdhProcessParams, s: float, y: float) -> float:
    """Overloaded p_s(y): density for y > 0, atom mass for y in the discrete support, else 0."""
    if y > 0:
        return float(marginal_density(pp, s, np.array([y]))[0])
    g = atom_grid(pp, s)
    i = g.index(y)
    return 0.0 if i is None else math.exp(g.log_masses[i])


class CdhKernel:
    """p_{s,t}(x, .) for x in the support of p_s."""

    def __init__(self, pp: CdhProcessParams, s: float, t: float):
        pp.check_time(s)
        pp.check_time(t)
        if not s < t:
            raise TimeRangeError(f"need s < t, got s = {s}, t = {t}")
        self.pp, self.s, self.t = pp, s, t
        self.src = atom_grid(pp, s)
        self.dst = atom_grid(pp, t)
        self._cache: dict = {}

    def source_kind(self, x: float) -> tuple[str, int]:
        if x > 0:
            return "c", -1
        i = self.src.index(x)
        if i is None:
            raise SupportError(f"x = {x} is not in the support at time {self.s}")
        if self.src.flavor == "u":
            return "u", self._index_u(x)
        return "v", self._index_v(x)

    def _index_u(self, x: float) -> int:
        u, s = self.pp.u, self.s
        for j in range(math.floor(-u + s / 2) + 1):
            if abs(x_u(u, j, s) - x) <= LOC_TOL * max(1.0, abs(x)):
                return j
        raise SupportError(f"{x} is not a u-atom at time {s}")

    def _index_v(self, x: float) -> int:
        v, s = self.pp.v, self.s
        for j in range(math.floor(-v - s / 2) + 1):
            if abs(x_v(v, j, s) - x) <= LOC_TOL * max(1.0, abs(x)):
                return j
        raise SupportError(f"{x} is not a v-atom at time {s}")

    def params(self, x: float) -> tuple[float, complex, complex, tuple]:
        u, v, s, t = self.pp.u, self.pp.v, self.s, self.t
        kind, j = self.source_kind(x)
        frame_u = tuple(x_u(u, i, t) for i in range(math.floor(-u + t / 2) + 1)) if u - t / 2 < 0 else ()
        frame_v = tuple(x_v(v, i, t) for i in range(math.floor(-v - t / 2) + 1)) if v + t / 2 < 0 else ()
        if kind == "c":
            mu = math.sqrt(x) / 2
            return u - t / 2, complex((t - s) / 2, mu), complex((t - s) / 2, -mu), frame_u
        if kind == "u":
            return u - t / 2, complex(-u + t / 2 - j), complex(u + t / 2 - s + j), frame_u
        return v + j + t / 2, complex(t / 2 - s - v - j), complex(u - t / 2), frame_v

    def __call__(self, x: float) -> MixedMeasure:
        key = float(x)
        if key not in self._cache:
            a, b, c, fr = self.params(key)
            self._cache[key] = cdh_measure(classify_cdh(a, b, c, fr if fr else None))
        return self._cache[key]

    describe = __call__

    def log_chart_density_matrix(self, xs, is_atom, t):
        xs = np.asarray(xs, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.empty((len(xs), len(t)))
        tail = log_inv_abs_gamma_iy_sq(t)
        a_rows: dict = {}
        for i, x in enumerate(xs):
            a, b, c, lnorm = self._row_params(float(x))
            if a not in a_rows:
                a_rows[a] = _line(a, t)
            out[i] = lnorm + a_rows[a] + _line(b, t) + _line(c, t) + tail
        return out

    def _row_params(self, x: float):
        key = ("row", x)
        if key not in self._cache:
            a, b, c, _ = self.params(x)
            self._cache[key] = (a, b, c, cdh_log_norm(a, b, c))
        return self._cache[key]

    def value(self, x: float, y: float) -> float:
        """Overloaded p_{s,t}(x, y): density at y > 0 or mass at an atom y."""
        mu = self(x)
        if y > 0:
            return float(mu.density(np.array([y]))[0]) if mu.has_density else 0.0
        return mu.atom_mass(y)


def transition(pp: CdhProcessParams, s: float, t: float, x: float) -> MixedMeasure:
    return CdhKernel(pp, s, t)(x)


def transition_value(pp: CdhProcessParams, s: float, t: float, x: float, y: float) -> float:
    return CdhKernel(pp, s, t).value(x, y)


# ---------------------------------------------------------------- structural zeros

def structural_zeros(pp: CdhProcessParams, s: float, t: float, m: float = 1.0) -> dict:
    """Evaluate the transition at every (source, target) class where it must vanish.

    Returns {case number: list of values}; classes absent for (u, v, s, t) are empty.
    """
    k = CdhKernel(pp, s, t)
    src_atoms, dst = k.src, k.dst
    out: dict = {1: [], 2: [], 3: [], 4: [], 5: []}
    probe_c = [0.5, 2.0, 7.0]
    if dst.flavor == "v":
        out[1] += [k.value(m, y) for y in dst.locations]
    if src_atoms.flavor == "v" and dst.flavor == "u":
        out[2] += [k.value(x, y) for x in src_atoms.locations for y in dst.locations]
    if src_atoms.flavor == "u":
        out[3] += [k.value(x, y) for x in src_atoms.locations for y in probe_c]
        if dst.flavor == "v":
            out[4] += [k.value(x, y) for x in src_atoms.locations for y in dst.locations]
        if dst.flavor == "u":
            for x in src_atoms.locations:
                j = k._index_u(x)
                for kk in range(math.floor(-pp.u + t / 2) + 1):
                    if kk > j:
                        out[5].append(k.value(x, x_u(pp.u, kk, t)))
    return out


# ---------------------------------------------------------------- consistency

@dataclass
class ConsistencyReport:
    max_residual: float
    rows: list = field(default_factory=list)  # (label, lhs, rhs, residual)


def _rel(l: float, r: float) -> float:
    if l == r:
        return 0.0
    return abs(l - r) / max(abs(r), 1e-300)


def _integrate_kernel_value(mu: MixedMeasure, kernel: CdhKernel, y: float, spec: QuadratureSpec) -> float:
    if y > 0:
        sq = math.sqrt(y)

        def f(xs):
            xs = np.atleast_1d(xs)
            vals = np.zeros(len(xs))
            dens = [i for i, x in enumerate(xs) if kernel(float(x)).has_density]
            if dens:
                m = kernel.log_chart_density_matrix(xs[dens], None, np.array([sq]))[:, 0]
                vals[dens] = np.exp(m) / (2 * sq)
            return vals
    else:
        def f(xs):
            return np.array([kernel(float(x)).atom_mass(y) for x in np.atleast_1d(xs)])
    return ms.integrate(mu, f, spec)


def check_consistency(pp: CdhProcessParams, s: float, t: float, w: float, probes: Sequence[float],
                      spec: Optional[QuadratureSpec] = None, sources: Sequence[float] = (1.0,)) -> ConsistencyReport:
    """Residuals of  int p_s(dm) p_{s,t}(m, .) = p_t(.)  and  int p_{s,t}(m, dr) p_{t,w}(r, .) = p_{s,w}(m, .).

    probes: targets (positive reals, or atom locations at the target time; atom
    locations of p_t and p_w are added automatically). sources: starting points m
    for the second identity (atoms of p_s are added automatically). The first
    identity is also checked on the functional int e^{-r/4} p(dr).
    """
    if not (0 <= s < t < w < pp.c_uv):
        raise TimeRangeError("need 0 <= s < t < w < C_uv")
    spec = spec or QuadratureSpec()
    rows = []
    p_s = marginal(pp, s)
    k_st, k_tw, k_sw = CdhKernel(pp, s, t), CdhKernel(pp, t, w), CdhKernel(pp, s, w)
    # first identity, pointwise
    targets_t = [y for y in probes if y > 0] + list(atom_grid(pp, t).locations)
    for y in targets_t:
        lhs = _integrate_kernel_value(p_s, k_st, y, spec)
        rhs = marginal_value(pp, t, y)
        rows.append((f"marginal s->t at {y:.6g}", lhs, rhs, _rel(lhs, rhs)))
    # first identity, weighted functional
    w4 = lambda r: np.exp(-np.asarray(r) / 4)  # noqa: E731
    inner = lambda xs: np.array([ms.integrate(k_st(float(x)), w4, spec) for x in np.atleast_1d(xs)])  # noqa: E731
    lhs = ms.integrate(p_s, inner, spec)
    rhs = ms.integrate(marginal(pp, t), w4, spec)
    rows.append(("marginal s->t, e^{-r/4} functional", lhs, rhs, _rel(lhs, rhs)))
    # second identity
    srcs = list(sources) + list(atom_grid(pp, s).locations)
    targets_w = [y for y in probes if y > 0] + list(atom_grid(pp, w).locations)
    for m in srcs:
        mu = k_st(m)
        for y in targets_w:
            lhs = _integrate_kernel_value(mu, k_tw, y, spec)
            rhs = k_sw.value(m, y)
            rows.append((f"transition {m:.6g} -> {y:.6g}", lhs, rhs, _rel(lhs, rhs)))
    return ConsistencyReport(max(r[3] for r in rows), rows)

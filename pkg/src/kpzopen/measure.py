"""Mixed (density + atoms) measures and panel Gauss-Legendre quadrature.

A measure's continuous part lives on an interval and is integrated in a chart
variable t:

    linear : x = t
    sqrt   : x = lo + t^2     (semi-infinite supports; smooths 1/sqrt endpoint behaviour)
    cos    : x = cos t        (supports inside [-1, 1]; t runs from arccos(hi) to arccos(lo))

Log-densities are kept in log space throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

NEG_INF = -np.inf


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    location: float
    log_mass: float

    @property
    def mass(self) -> float:
        return math.exp(self.log_mass)


@dataclass(frozen=True)
class QuadratureSpec:
    panels: int = 48
    nodes_per_panel: int = 32
    cutoff: float = 1600.0
    rel_tol: float = 1e-14
    grading: int = 12

    def __post_init__(self):
        if self.panels < 1 or self.nodes_per_panel < 2 or self.rel_tol <= 0 or self.cutoff <= 0:
            raise MeasureError(f"invalid QuadratureSpec {self}")

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        return replace(self, panels=self.panels * factor)


@dataclass(frozen=True)
class MixedMeasure:
    support_lo: float
    support_hi: float
    log_density: Optional[Callable] = None  # in x; None means no continuous part
    atoms: tuple = ()
    is_probability: bool = True
    chart: str = "linear"
    log_chart_density: Optional[Callable] = None  # in t, Jacobian included
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.chart not in ("linear", "sqrt", "cos"):
            raise MeasureError(f"unknown chart {self.chart}")
        locs = [a.location for a in self.atoms]
        if len(set(locs)) != len(locs):
            raise MeasureError("atoms must have distinct locations")
        for a in self.atoms:
            if not np.isfinite(a.log_mass):
                raise MeasureError(f"atom at {a.location} has non-finite log mass")

    @property
    def has_density(self) -> bool:
        return self.log_density is not None or self.log_chart_density is not None

    # chart maps ---------------------------------------------------------
    def chart_range(self, spec: QuadratureSpec) -> tuple[float, float]:
        lo, hi = self.support_lo, self.support_hi
        if self.chart == "linear":
            if not np.isfinite(hi):
                hi = lo + spec.cutoff
            return lo, hi
        if self.chart == "sqrt":
            hi = min(hi, lo + spec.cutoff)
            return 0.0, math.sqrt(hi - lo)
        return math.acos(min(hi, 1.0)), math.acos(max(lo, -1.0))

    def to_x(self, t):
        t = np.asarray(t, dtype=float)
        if self.chart == "linear":
            return t
        if self.chart == "sqrt":
            return self.support_lo + t * t
        return np.cos(t)

    def log_weight_chart(self, t):
        """log of density times Jacobian dx/dt at chart points t."""
        t = np.asarray(t, dtype=float)
        if self.log_chart_density is not None:
            return np.asarray(self.log_chart_density(t), dtype=float)
        x = self.to_x(t)
        with np.errstate(divide="ignore"):
            if self.chart == "linear":
                jac = np.zeros_like(t)
            elif self.chart == "sqrt":
                jac = np.log(2.0 * t)
            else:
                jac = np.log(np.sin(t))
        return np.asarray(self.log_density(x), dtype=float) + jac

    def density(self, x):
        """Pointwise density in x."""
        x = np.asarray(x, dtype=float)
        if self.log_density is not None:
            return np.exp(self.log_density(x))
        if self.log_chart_density is None:
            return np.zeros_like(x)
        if self.chart == "linear":
            return np.exp(self.log_chart_density(x))
        if self.chart == "sqrt":
            y = np.sqrt(x - self.support_lo)
            return np.exp(self.log_chart_density(y)) / (2.0 * y)
        t = np.arccos(x)
        return np.exp(self.log_chart_density(t)) / np.sin(t)

    def atom_mass(self, location: float, tol: float = 1e-9) -> float:
        for a in self.atoms:
            if abs(a.location - location) <= tol * max(1.0, abs(location)):
                return a.mass
        return 0.0

    def tilt(self, log_f: Callable) -> "MixedMeasure":
        """Measure f(x) mu(dx) for positive f given through log f."""
        ld = self.log_density
        lcd = self.log_chart_density
        new_ld = None if ld is None else (lambda x, ld=ld: ld(x) + log_f(np.asarray(x, dtype=float)))
        new_lcd = None
        if lcd is not None:
            to_x = self.to_x
            new_lcd = lambda t, lcd=lcd: lcd(t) + log_f(to_x(t))  # noqa: E731
        atoms = tuple(Atom(a.location, a.log_mass + float(log_f(np.array([a.location]))[0])) for a in self.atoms)
        atoms = tuple(a for a in atoms if np.isfinite(a.log_mass))
        return MixedMeasure(self.support_lo, self.support_hi, new_ld, atoms, False, self.chart, new_lcd, dict(self.meta))


def pure_atoms(points: Sequence[tuple[float, float]], is_probability: bool = True) -> MixedMeasure:
    atoms = tuple(Atom(float(x), math.log(m)) for x, m in points if m > 0)
    return MixedMeasure(0.0, 0.0, None, atoms, is_probability)


# ---------------------------------------------------------------- panels

@dataclass(frozen=True)
class _Panel:
    lo: float
    hi: float


def panel_edges(t0: float, t1: float, spec: QuadratureSpec, grade_lo: bool = True, grade_hi: bool = True) -> np.ndarray:
    """Uniform edges with geometric grading inside the end panels."""
    edges = np.linspace(t0, t1, spec.panels + 1)
    h = edges[1] - edges[0]
    parts = [edges]
    g = spec.grading
    if g > 0 and grade_lo:
        parts.append(t0 + h * 2.0 ** -np.arange(1, g + 1))
    if g > 0 and grade_hi:
        parts.append(t1 - h * 2.0 ** -np.arange(1, g + 1))
    return np.unique(np.concatenate(parts))


_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _panel_nodes(lo: float, hi: float, n: int):
    x, w = _gauss_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), np.log(w * half)


def _grading_flags(mu: MixedMeasure) -> tuple[bool, bool]:
    # semi-infinite charts are truncated at the far end; no grading needed there
    if mu.chart == "sqrt" or not np.isfinite(mu.support_hi):
        return True, False
    return True, True


def walk_panels(mu: MixedMeasure, spec: QuadratureSpec, evaluate: Callable, adaptive: bool = True):
    """Visit quadrature panels of mu's continuous part in chart order.

    evaluate(x, log_w) -> (payload, log_abs_contrib) is called per block of panels.
    Stops once two consecutive panels after the running peak contribute less
    than rel_tol times the accumulated total. Returns list of payloads.
    """
    if not mu.has_density:
        return []
    t0, t1 = mu.chart_range(spec)
    if not t1 > t0:
        return []
    glo, ghi = _grading_flags(mu)
    edges = panel_edges(t0, t1, spec, glo, ghi)
    out = []
    acc = NEG_INF
    peak = NEG_INF
    quiet = 0
    log_tol = math.log(spec.rel_tol)
    n = spec.nodes_per_panel
    # evaluate a few panels at a time to keep numpy calls large
    block = 4
    i = 0
    npan = len(edges) - 1
    while i < npan:
        j = min(npan, i + block)
        ts, lws = [], []
        for k in range(i, j):
            t, lw = _panel_nodes(edges[k], edges[k + 1], n)
            ts.append(t)
            lws.append(lw)
        t = np.concatenate(ts)
        with np.errstate(divide="ignore", invalid="ignore"):
            lw = np.concatenate(lws) + mu.log_weight_chart(t)
        x = mu.to_x(t)
        payload, lc = evaluate(x, lw)
        out.append(payload)
        lc = np.asarray(lc, dtype=float)
        if np.any(np.isnan(lc)):
            bad = x[np.isnan(lc)][0]
            raise MeasureError(f"non-finite integrand at x = {bad!r}")
        stop = False
        for k in range(j - i):
            seg = lc[k * n:(k + 1) * n]
            pc = logsumexp(seg) if np.any(np.isfinite(seg)) else NEG_INF
            acc = np.logaddexp(acc, pc)
            if pc >= peak:
                peak = pc
                quiet = 0
            elif adaptive and np.isfinite(acc) and pc < acc + log_tol:
                quiet += 1
                if quiet >= 2:
                    stop = True
            else:
                quiet = 0
        if stop:
            break
        i = j
    return out


def _check_finite(x, v):
    bad = ~np.isfinite(v)
    if np.any(bad):
        raise MeasureError(f"non-finite integrand at x = {np.asarray(x)[bad][0]!r}")


def integrate(mu: MixedMeasure, f: Callable, spec: QuadratureSpec) -> float:
    """integral of f d mu: panel Gauss-Legendre on the density plus the atom sum."""
    def ev(x, lw):
        fv = np.asarray(f(x), dtype=float) * np.ones_like(x)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            w = np.exp(lw)
            terms = np.where(w == 0, 0.0, w * fv)
            lc = np.where(w == 0, NEG_INF, lw + np.log(np.abs(fv)))
        _check_finite(x, terms)
        return terms, np.where(np.isfinite(lc), lc, NEG_INF)

    total = 0.0
    for terms in walk_panels(mu, spec, ev):
        total += float(np.sum(terms))
    if mu.atoms:
        loc = np.array([a.location for a in mu.atoms])
        fv = np.asarray(f(loc), dtype=float) * np.ones_like(loc)
        m = np.exp([a.log_mass for a in mu.atoms])
        _check_finite(loc, fv * m)
        total += float(np.sum(fv * m))
    return total


def log_integrate(mu: MixedMeasure, log_f: Optional[Callable], spec: QuadratureSpec) -> float:
    """log of integral of f d mu for positive f, given log f (None means f = 1)."""
    def ev(x, lw):
        lc = lw if log_f is None else lw + np.asarray(log_f(x), dtype=float)
        lc = np.where(np.isnan(lc) & np.isneginf(lw), NEG_INF, lc)
        return lc, lc

    parts = [p for p in walk_panels(mu, spec, ev)]
    if mu.atoms:
        loc = np.array([a.location for a in mu.atoms])
        lm = np.array([a.log_mass for a in mu.atoms])
        parts.append(lm if log_f is None else lm + np.asarray(log_f(loc), dtype=float))
    if not parts:
        return NEG_INF
    allv = np.concatenate(parts)
    if np.any(np.isnan(allv)) or np.any(allv == np.inf):
        raise MeasureError("non-finite log integrand")
    return float(logsumexp(allv)) if np.any(np.isfinite(allv)) else NEG_INF


def total_mass(mu: MixedMeasure, spec: QuadratureSpec) -> float:
    return integrate(mu, lambda x: np.ones_like(x), spec)


def nodes(mu: MixedMeasure, spec: QuadratureSpec, adaptive: bool = True):
    """(x, log_w, is_atom) for all quadrature nodes of the density plus the atoms."""
    parts = walk_panels(mu, spec, lambda x, lw: ((x, lw), lw), adaptive=adaptive)
    xs = [p[0] for p in parts]
    lws = [p[1] for p in parts]
    flags = [np.zeros(len(p[0]), dtype=bool) for p in parts]
    if mu.atoms:
        xs.append(np.array([a.location for a in mu.atoms]))
        lws.append(np.array([a.log_mass for a in mu.atoms]))
        flags.append(np.ones(len(mu.atoms), dtype=bool))
    if not xs:
        return np.zeros(0), np.zeros(0), np.zeros(0, dtype=bool)
    x = np.concatenate(xs)
    lw = np.concatenate(lws)
    fl = np.concatenate(flags)
    keep = np.isfinite(lw)
    return x[keep], lw[keep], fl[keep]


# ---------------------------------------------------------------- chaining

def _merge_atoms(groups: list[list[tuple[float, float]]], tol: float = 1e-9) -> tuple:
    locs: list[float] = []
    vals: list[list[float]] = []
    for grp in groups:
        for loc, lm in grp:
            for i, l0 in enumerate(locs):
                if abs(l0 - loc) <= tol * max(1.0, abs(loc)):
                    vals[i].append(lm)
                    break
            else:
                locs.append(loc)
                vals.append([lm])
    atoms = [Atom(l0, float(logsumexp(v))) for l0, v in zip(locs, vals)]
    atoms = [a for a in atoms if np.isfinite(a.log_mass)]
    return tuple(sorted(atoms, key=lambda a: a.location))


def chain(mu: MixedMeasure, kernel: Callable, spec: QuadratureSpec) -> MixedMeasure:
    """nu(dy) = integral mu(dx) kernel(x)(dy), realized on mu's quadrature nodes.

    kernel(x) returns a MixedMeasure. If kernel also exposes
    log_chart_density_matrix(xs, is_atom, t) the continuous part of nu is
    evaluated in one batched call instead of per node, and kernel.describe(x)
    (if present) supplies support and atoms without building the measure.
    """
    x, lw, is_atom = nodes(mu, spec)
    if len(x) == 0:
        raise MeasureError("chain: source measure has no mass")
    describe = getattr(kernel, "describe", None)
    matrix = getattr(kernel, "log_chart_density_matrix", None)
    if describe is not None and matrix is not None:
        ks = [describe(float(xi)) for xi in x]
    else:
        ks = [kernel(float(xi)) for xi in x]
    dens = [(k.support_lo, k.support_hi, k.chart) for k in ks if k.has_density]
    if len(set(dens)) > 1:
        raise MeasureError(f"chain: kernels disagree on continuous support {sorted(set(dens))}")
    has_dens = bool(dens)
    atoms = _merge_atoms([[(a.location, lwi + a.log_mass) for a in k.atoms] for k, lwi in zip(ks, lw)])
    is_prob = mu.is_probability and all(k.is_probability for k in ks)
    if not has_dens:
        return MixedMeasure(0.0, 0.0, None, atoms, is_prob)
    lo, hi, chart = dens[0]
    cont = np.array([k.has_density for k in ks])
    xs_c, lw_c, at_c = x[cont], lw[cont], is_atom[cont]
    ks_c = [k for k, c in zip(ks, cont) if c]

    def lcd(t):
        t = np.asarray(t, dtype=float)
        if matrix is not None:
            m = matrix(xs_c, at_c, t)
            with np.errstate(invalid="ignore"):
                return logsumexp(m + lw_c[:, None], axis=0)
        acc = np.full(t.shape, NEG_INF)
        for k, w in zip(ks_c, lw_c):
            acc = np.logaddexp(acc, w + k.log_weight_chart(t))
        return acc

    nu = MixedMeasure(lo, hi, None, atoms, is_prob, chart, lcd)
    return nu

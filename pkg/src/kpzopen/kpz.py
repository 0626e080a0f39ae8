"""Limiting open-KPZ Laplace transform via the CDH process, the closed
single-point formula, the Brownian case and the finite-N comparison harness.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import integrate as sint
from scipy.special import loggamma

from . import measure as ms
from .asep import BoundaryParams, laplace_increment, lattice_index, model_from_uv, stationary_exact
from .askey_wilson import default_aw_spec, phi_n
from .cdh import CdhKernel, CdhProcessParams, marginal
from .measure import QuadratureSpec
from .query import LaplaceQuery, NestingError, QueryError

__all__ = ["LaplaceQuery", "g_value", "phi_limit", "range_tag", "single_point_formula", "brownian_case",
           "brownian_limit", "sandwich_check", "convergence", "RangeError", "PositivityError"]

THEOREM_ONLY = "theorem-range, outside proposition-range"
BOTH_RANGES = "proposition-range"


class RangeError(ValueError):
    pass


class PositivityError(ArithmeticError):
    pass


def g_value(query: LaplaceQuery, r: Sequence[float]) -> float:
    """exp(1/4 sum_k (s_k^2 - r_k)(X_k - X_{k-1})) over k = 1..d+1."""
    r = list(r)
    if len(r) != query.d + 1:
        raise QueryError("r must have d + 1 entries")
    s = list(query.s) + [0.0]
    X = [0.0] + list(query.X) + [1.0]
    return math.exp(0.25 * sum((s[k] ** 2 - r[k]) * (X[k + 1] - X[k]) for k in range(query.d + 1)))


def range_tag(pp: CdhProcessParams, query: LaplaceQuery) -> str:
    """Which admissibility gate the query meets; raises if even s_1 < C_uv fails."""
    q = query.merged()
    if q.d == 0:
        return BOTH_RANGES
    if not q.s[0] < pp.c_uv:
        raise RangeError(f"s_1 = {q.s[0]} must be < C_uv = {pp.c_uv}")
    if all(c < pp.c_duv(q.d) for c in q.c):
        return BOTH_RANGES
    return THEOREM_ONLY


def _tilt(mu, dx: float):
    if dx == 0:
        return mu
    return mu.tilt(lambda r: -0.25 * dx * np.asarray(r, dtype=float))


def phi_limit(pp: CdhProcessParams, query: LaplaceQuery, spec: Optional[QuadratureSpec] = None) -> float:
    """phi_{u,v}(c, X): chain p_0 -> p_{s_d} -> ... -> p_{s_1} with the G weights, over int e^{-r/4} p_0."""
    q = query.merged()
    if q.d == 0:
        return 1.0
    if q.d > 2:
        raise NestingError("phi_limit supports d <= 2")
    range_tag(pp, q)
    spec = spec or QuadratureSpec()
    s = list(q.s) + [0.0]
    X = [0.0] + list(q.X) + [1.0]
    dX = [X[k + 1] - X[k] for k in range(q.d + 1)]  # dX[k] pairs with s[k]
    mu = _tilt(marginal(pp, 0.0), dX[q.d])
    for i in range(q.d - 1, -1, -1):
        mu = _tilt(ms.chain(mu, CdhKernel(pp, s[i + 1], s[i]), spec), dX[i])
    log_num = ms.log_integrate(mu, None, spec) + 0.25 * sum(sk * sk * dx for sk, dx in zip(s, dX))
    log_den = ms.log_integrate(marginal(pp, 0.0), lambda r: -0.25 * np.asarray(r, dtype=float), spec)
    val = math.exp(log_num - log_den)
    if not (np.isfinite(val) and val > 0):
        raise PositivityError(f"phi_limit = {val} is not finite and positive")
    return val


def _single_point_integral(u: float, v: float, c: float, epsabs: float, epsrel: float) -> float:
    # y = sqrt(r): dr / (sqrt r |Gamma(i sqrt r)|^2) = 2 y sinh(pi y)/pi dy
    def f(y):
        lg = 2 * (loggamma(c / 2 + v + 0.5j * y).real + loggamma(-c / 2 + u + 0.5j * y).real)
        return y / math.pi * math.exp(lg - 0.25 * y * y + math.pi * y) * (-math.expm1(-2 * math.pi * y))

    val, _ = sint.quad(f, 0.0, math.inf, epsabs=epsabs, epsrel=epsrel, limit=400)
    return val


def single_point_formula(u: float, v: float, c: float, spec: Optional[QuadratureSpec] = None) -> float:
    """E exp(-c H_{u,v}(1)) for u, v > 0 and 0 < c < 2u, by adaptive quadrature in y = sqrt(r)."""
    if not (u > 0 and v > 0):
        raise RangeError("single_point_formula needs u, v > 0")
    if not 0 < c < 2 * u:
        raise RangeError(f"need 0 < c < 2u, got c = {c}")
    # quadpack refuses epsrel below 50 machine epsilons
    tol = max(spec.rel_tol, 1e-13) if spec is not None else 1e-13
    num = _single_point_integral(u, v, c, 0.0, tol)
    den = _single_point_integral(u, v, 0.0, 0.0, tol)
    return math.exp(c * c / 4) * num / den


def _segments(N: int, query: LaplaceQuery):
    q = query.merged()
    ns = [0] + [lattice_index(N, x) for x in q.X]
    return q, ns


def brownian_case(u: float, N: int, query: LaplaceQuery) -> float:
    """Exact Laplace transform of the scaled +-1 walk with up-probability 1/(1+q^u), q = e^{-2/sqrt N}."""
    q, ns = _segments(N, query)
    if q.d == 0:
        return 1.0
    qq = math.exp(-2.0 / math.sqrt(N))
    rho = 1.0 / (1.0 + qq ** u)
    sq = math.sqrt(N)
    log_val = 0.0
    for k in range(q.d):
        a = q.s[k] / sq
        log_val += (ns[k + 1] - ns[k]) * math.log(rho * math.exp(-a) + (1 - rho) * math.exp(a))
    return math.exp(log_val)


def brownian_limit(u: float, query: LaplaceQuery) -> float:
    q = query.merged()
    X = [0.0] + list(q.X)
    return math.exp(sum((X[k + 1] - X[k]) * (sk * sk / 2 - u * sk) for k, sk in enumerate(q.s)))


@dataclass(frozen=True)
class SandwichResult:
    lower_drift: float   # model (-v, v)
    middle: float        # model (u, v)
    upper_drift: float   # model (u, -u)
    ordered: bool


def sandwich_check(u: float, v: float, N: int, X: float, Xp: float, c: float, tol: float = 1e-12) -> SandwichResult:
    """E exp(-c (H(X') - H(X))) under the stationary laws of (-v, v), (u, v), (u, -u).

    Increments are stochastically ordered in that order, so for c > 0 the
    transforms are nonincreasing left to right.
    """
    if not u + v >= 0:
        raise RangeError("need u + v >= 0")
    if N > 12:
        raise RangeError("sandwich_check solves exactly; N <= 12")
    if not 0 <= X < Xp <= 1:
        raise QueryError("need 0 <= X < X' <= 1")
    vals = [laplace_increment(stationary_exact(model_from_uv(N, BoundaryParams(a, b))), X, Xp, c)
            for a, b in ((-v, v), (u, v), (u, -u))]
    if c >= 0:
        ok = vals[0] >= vals[1] - tol and vals[1] >= vals[2] - tol
    else:
        ok = vals[0] <= vals[1] + tol and vals[1] <= vals[2] + tol
    return SandwichResult(vals[0], vals[1], vals[2], ok)


@dataclass(frozen=True)
class LadderRow:
    N: int
    phi_n: float
    gap: float


@dataclass(frozen=True)
class ConvergenceResult:
    phi_limit: float
    rows: tuple
    monotone: bool
    tag: str


def convergence(bp: BoundaryParams, query: LaplaceQuery, Ns: Sequence[int] = (16, 64, 256, 1024),
                spec: Optional[QuadratureSpec] = None) -> ConvergenceResult:
    pp = CdhProcessParams(bp.u, bp.v)
    tag = range_tag(pp, query)
    lim = phi_limit(pp, query, spec)
    rows = []
    for N in Ns:
        val = phi_n(bp, N, query, default_aw_spec(N))
        rows.append(LadderRow(N, val, abs(val - lim)))
    mono = all(b.gap < a.gap for a, b in zip(rows[:-1], rows[1:]))
    return ConvergenceResult(lim, tuple(rows), mono, tag)

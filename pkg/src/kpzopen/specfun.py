"""Special functions: complex log-gamma, Bernoulli polynomials, Hurwitz zeta,
q-Pochhammer symbols, Jacobi theta functions and small-kappa expansions of
log (q^z; q)_inf.

Everything here is vectorized over numpy arrays where it is cheap to do so.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numba
import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)
POLE_TOL = 1e-12
QPOCH_TRUNC = 1e-18
THETA_TRUNC = 1e-18

# Godfrey's g = 607/128, n = 15 coefficients
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C = np.array([
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
])


class SpecfunError(ValueError):
    pass


def _scalarize(x):
    return x[()] if isinstance(x, np.ndarray) and x.ndim == 0 else x


def _lanczos_right(z):
    # valid for Re z >= 1/2
    z = z - 1.0
    x = np.full(z.shape, _LANCZOS_C[0], dtype=complex)
    for i in range(1, len(_LANCZOS_C)):
        x = x + _LANCZOS_C[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    return 0.5 * LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(x)


def log_gamma(z):
    """Complex log-gamma on the standard branch (cut along the negative real axis).

    Works on scalars and arrays. Raises at nonpositive integers.
    """
    z = np.asarray(z, dtype=complex)
    near = np.abs(z - np.round(z.real)) < POLE_TOL
    if np.any(near & (np.round(z.real) <= 0)):
        raise SpecfunError("log_gamma: pole at nonpositive integer")
    out = np.empty(z.shape, dtype=complex)
    right = z.real >= 0.5
    out[right] = _lanczos_right(z[right])
    if np.any(~right):
        zl = z[~right]
        # reflection with the branch correction used for the standard loggamma
        corr = np.copysign(2 * np.pi, zl.imag) * np.floor(0.5 * zl.real + 0.25)
        sin_part = np.sin(np.pi * zl)
        big = np.abs(zl.imag) > 5.0
        log_s = np.empty(zl.shape, dtype=complex)
        log_s[~big] = np.log(sin_part[~big])
        if np.any(big):
            zb = zl[big]
            sg = np.where(zb.imag > 0, 1.0, -1.0)
            # |sin(pi z)| ~ e^{pi |Im z|}/2; keep phase from the exact ratio
            w = np.exp(2j * np.pi * zb * sg)
            lead = -1j * np.pi * zb * sg - np.log(2.0) + np.log1p(-w)
            phase = np.where(sg > 0, 0.5j * np.pi, -0.5j * np.pi)
            val = lead + phase
            # wrap the imaginary part onto the principal log of sin(pi z)
            val = val.real + 1j * np.angle(np.exp(1j * val.imag))
            log_s[big] = val
        out[~right] = LOG_PI + 1j * corr - log_s - _lanczos_right(1.0 - zl)
    return _scalarize(out)


def log_abs_gamma(z):
    """Re log Gamma(z) = log|Gamma(z)|."""
    return _scalarize(np.real(log_gamma(z)))


def abs_gamma_sq(z):
    lv = 2.0 * np.real(log_gamma(z))
    if np.any(lv > 709.0):
        raise OverflowError("abs_gamma_sq: |Gamma|^2 exceeds double range")
    return _scalarize(np.exp(lv))


@numba.njit(cache=True)
def _log_abs_gamma_right(x, y, coef, g):
    # Re of the Lanczos log-gamma, x >= 1/2
    zr = x - 1.0
    sr = coef[0]
    si = 0.0
    for i in range(1, coef.shape[0]):
        dr = zr + i
        den = dr * dr + y * y
        sr += coef[i] * dr / den
        si -= coef[i] * y / den
    tr = zr + g + 0.5
    # Re[(z + 1/2) log t - t] with z = zr + i y, t = tr + i y
    lt_r = 0.5 * math.log(tr * tr + y * y)
    lt_i = math.atan2(y, tr)
    return 0.5 * math.log(2.0 * math.pi) + (zr + 0.5) * lt_r - y * lt_i - tr + 0.5 * math.log(sr * sr + si * si)


@numba.njit(cache=True)
def _log_abs_gamma_sq_grid(x, y, coef, g):
    out = np.empty(y.shape[0])
    for k in range(y.shape[0]):
        yk = y[k]
        if x >= 0.5:
            out[k] = 2.0 * _log_abs_gamma_right(x, yk, coef, g)
        else:
            # |Gamma(z)|^2 = pi^2 / (|sin(pi z)|^2 |Gamma(1-z)|^2)
            ay = abs(math.pi * yk)
            sx = math.sin(math.pi * x)
            if ay > 5.0:
                e = math.exp(-2.0 * ay)
                lsin2 = 2.0 * ay - 2.0 * math.log(2.0) + math.log((1.0 - e) ** 2 + 4.0 * sx * sx * e)
            else:
                sh = math.sinh(ay)
                lsin2 = math.log(sx * sx + sh * sh)
            out[k] = 2.0 * math.log(math.pi) - lsin2 - 2.0 * _log_abs_gamma_right(1.0 - x, -yk, coef, g)
    return out


def log_abs_gamma_sq_line(x: float, y):
    """log |Gamma(x + i y)|^2 for real x and real array y (inf at poles)."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        out = _log_abs_gamma_sq_grid(float(x), np.ascontiguousarray(y).ravel(), _LANCZOS_C, _LANCZOS_G)
    return _scalarize(out.reshape(y.shape))


def log_gamma_real_signed(x: float) -> tuple[float, float]:
    """(log|Gamma(x)|, sign Gamma(x)) for real x, including negative non-integers."""
    x = float(x)
    if x <= 0 and abs(x - round(x)) < POLE_TOL:
        raise SpecfunError(f"log_gamma: pole at {x}")
    if x > 0:
        return math.lgamma(x), 1.0
    # reflection: Gamma(x) = pi / (sin(pi x) Gamma(1-x))
    s = math.sin(math.pi * x)
    return LOG_PI - math.log(abs(s)) - math.lgamma(1.0 - x), math.copysign(1.0, s)


def log_inv_abs_gamma_iy_sq(y):
    """log(1/|Gamma(i y)|^2) = log(y sinh(pi y)/pi), stable for y >= 0 (-inf at 0)."""
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.log(y) + np.pi * y + np.log1p(-np.exp(-2 * np.pi * y)) - math.log(2.0) - LOG_PI
    return _scalarize(out)


# ---------------------------------------------------------------- Bernoulli

@lru_cache(maxsize=None)
def bernoulli_number(n: int) -> Fraction:
    """B_n with B_1 = -1/2."""
    if n < 0:
        raise SpecfunError("bernoulli_number: n < 0")
    b = [Fraction(1)]
    for m in range(1, n + 1):
        acc = Fraction(0)
        for k in range(m):
            acc += math.comb(m + 1, k) * b[k]
        b.append(-acc / (m + 1))
    return b[n]


def bernoulli_poly(n: int, x):
    """B_n(x) via B_n(x) = sum_k C(n,k) B_k x^(n-k); x may be complex or an array."""
    if n < 0:
        raise SpecfunError("bernoulli_poly: n < 0")
    x = np.asarray(x)
    out = np.zeros(x.shape, dtype=np.result_type(x, float))
    # Horner in x with coefficients C(n,k) B_k for power n-k
    for k in range(n + 1):
        out = out * x + math.comb(n, k) * float(bernoulli_number(k))
    return _scalarize(out)


# ---------------------------------------------------------------- zeta

def hurwitz_zeta(s, z):
    """Hurwitz zeta(s, z) for Re s > 1, Re z > 0 (Euler-Maclaurin), or s = 0, -1, -2, ..."""
    s = complex(s)
    z = complex(z)
    if s.imag == 0 and s.real <= 0 and float(s.real).is_integer():
        n = int(-s.real)
        return complex(-bernoulli_poly(n + 1, z) / (n + 1))
    if not (s.real > 1 and z.real > 0):
        raise SpecfunError("hurwitz_zeta: only Re(s) > 1 with Re(z) > 0, or s a nonpositive integer")
    M = 30 + int(abs(s.imag))
    n = np.arange(M)
    head = np.sum((n + z) ** (-s))
    w = M + z
    tail = w ** (1 - s) / (s - 1) + 0.5 * w ** (-s)
    rising = s  # (s)_{2k-1}
    for k in range(1, 15):
        if k > 1:
            rising *= (s + 2 * k - 3) * (s + 2 * k - 2)
        term = float(bernoulli_number(2 * k)) / math.factorial(2 * k) * rising * w ** (-s - 2 * k + 1)
        tail += term
        if abs(term) < 1e-18 * abs(head + tail):
            break
    return complex(head + tail)


def zeta_derivative_at_zero(z) -> complex:
    """d/ds zeta(s, z) at s = 0, equal to log(Gamma(z)/sqrt(2 pi))."""
    return complex(log_gamma(z) - 0.5 * LOG_2PI)


# ---------------------------------------------------------------- q-Pochhammer

def qpoch_finite(a, q: float, j: int):
    """(a; q)_j = prod_{k<j} (1 - a q^k)."""
    if j < 0:
        raise SpecfunError("qpoch_finite: j < 0")
    out = np.ones_like(np.asarray(a, dtype=complex))
    qk = 1.0
    for _ in range(j):
        out = out * (1.0 - np.asarray(a) * qk)
        qk *= q
    out = _scalarize(out)
    if np.all(np.imag(out) == 0):
        return _scalarize(np.real(out))
    return out


def _n_terms(amax: float, q: float) -> int:
    if q == 0 or amax == 0:
        return 1
    if amax < QPOCH_TRUNC:
        return 1
    return int(math.ceil(math.log(QPOCH_TRUNC / amax) / math.log(abs(q)))) + 1


def log_qpoch_inf(a, q: float):
    """log (a; q)_inf as a sum of principal logs, truncated once |a q^k| < 1e-18."""
    if not abs(q) < 1:
        raise SpecfunError("log_qpoch_inf: |q| must be < 1")
    if np.isscalar(a):
        a = complex(a)
        K = 1 if q == 0 else _n_terms(abs(a), q)
        acc = 0j
        qk = 1.0
        for _ in range(K):
            f = 1.0 - a * qk
            if abs(f) < 1e-300:
                raise SpecfunError("log_qpoch_inf: vanishing factor")
            acc += cmath.log(f)
            qk *= q
        return acc.real if acc.imag == 0 else acc
    a = np.asarray(a, dtype=complex)
    K = _n_terms(float(np.max(np.abs(a))) if a.size else 0.0, q)
    out = np.zeros(a.shape, dtype=complex)
    if q == 0:
        K = 1
    qk = 1.0
    for _ in range(K):
        f = 1.0 - a * qk
        if np.any(np.abs(f) < 1e-300):
            raise SpecfunError("log_qpoch_inf: vanishing factor")
        out = out + np.log(f)
        qk *= q
    return _scalarize(out)


def log_qpoch_inf_series(a, q: float):
    """-sum_n a^n / (n (1 - q^n)), valid for |a| < 1."""
    a = complex(a)
    if abs(a) >= 1:
        raise SpecfunError("log_qpoch_inf_series: needs |a| < 1")
    acc = 0j
    an = 1 + 0j
    n = 0
    while True:
        n += 1
        an *= a
        term = an / (n * (1.0 - q ** n))
        acc += term
        if abs(term) < 1e-18:
            break
    return -acc


@numba.njit(cache=True)
def _polar_sum(r, s2, q, K):
    out = np.zeros(s2.shape[0])
    for j in range(s2.shape[0]):
        acc = 0.0
        rk = r
        for _ in range(K):
            if abs(rk) > 0.25:
                f = (1.0 - rk) ** 2 + 4.0 * rk * s2[j]
                acc += math.log(f) if f > 0 else -math.inf
            else:
                acc += math.log1p(rk * (rk - 2.0 + 4.0 * s2[j]))
            rk *= q
        out[j] = acc
    return out


def log_abs_qpoch_polar_sq(r: float, phi, q: float):
    """log |(r e^{i phi}; q)_inf|^2 for real r, evaluated in real arithmetic.

    Each factor is (1 - r q^k)^2 + 4 r q^k sin^2(phi/2).
    """
    phi = np.asarray(phi, dtype=float)
    s2 = np.sin(0.5 * phi) ** 2
    K = _n_terms(abs(r), q)
    out = _polar_sum(float(r), np.ascontiguousarray(s2).ravel(), float(q), K).reshape(phi.shape)
    return _scalarize(out)


def pochhammer_rising(x, j: int):
    """[x]_j = x (x+1) ... (x+j-1); works for complex x."""
    if j < 0:
        raise SpecfunError("pochhammer_rising: j < 0")
    out = 1.0
    for i in range(j):
        out = out * (x + i)
    return out


# ---------------------------------------------------------------- theta

def _theta_sum(term, nu):
    # symmetric partial sums k = 0, +-1, ... until both tails are tiny
    acc = term(0, nu)
    k = 1
    while True:
        t1 = term(k, nu)
        t2 = term(-k, nu)
        acc += t1 + t2
        if k > 3 and abs(t1) < THETA_TRUNC and abs(t2) < THETA_TRUNC:
            break
        k += 1
        if k > 100000:
            raise SpecfunError("theta series failed to converge")
    return acc


def theta1(nu, rho_imag: float) -> complex:
    """theta_1(nu | i rho_imag) = -i sum_k (-1)^k e^{i pi rho (k+1/2)^2} e^{i pi nu (2k+1)}."""
    if rho_imag <= 0:
        raise SpecfunError("theta1: rho_imag must be > 0")
    nu = complex(nu)

    # terms k and -k-1 pair into 2 (-1)^k e^{-pi rho (k+1/2)^2} sin((2k+1) pi nu): exactly odd in nu
    acc = 0j
    k = 0
    while True:
        g = math.exp(-math.pi * rho_imag * (k + 0.5) ** 2)
        t = (-1) ** k * g * cmath.sin((2 * k + 1) * math.pi * nu)
        acc += t
        if k > 3 and abs(t) < THETA_TRUNC:
            break
        k += 1
        if k > 100000:
            raise SpecfunError("theta series failed to converge")
    return complex(2 * acc)


def theta4(nu, rho_imag: float) -> complex:
    """theta_4(nu | i rho_imag) = sum_k (-1)^k e^{i pi rho k^2} e^{2 k pi i nu}."""
    if rho_imag <= 0:
        raise SpecfunError("theta4: rho_imag must be > 0")
    nu = complex(nu)

    def term(k, nu):
        return (-1) ** k * np.exp(-np.pi * rho_imag * k * k + 2j * k * np.pi * nu)

    return complex(_theta_sum(term, nu))


def theta_identity_sides(kappa: float, z, negative: bool = False) -> tuple[complex, complex]:
    """Both sides of the modular rewriting of (+-e^{-kappa z}; e^{-kappa})_inf.

    Returns (lhs, rhs) as complex numbers (not logs).
    """
    z = complex(z)
    q = math.exp(-kappa)
    sgn = -1.0 if negative else 1.0
    lhs = np.exp(log_qpoch_inf(sgn * np.exp(-kappa * z), q))
    pref = math.sqrt(2 * math.pi / kappa) * np.exp(kappa / 8 - kappa * z / 2 + kappa * z * z / 2)
    den = np.exp(log_qpoch_inf(q, q) + log_qpoch_inf(sgn * np.exp(-kappa * (1 - z)), q))
    th = theta4(z, 2 * math.pi / kappa) if negative else theta1(z, 2 * math.pi / kappa)
    return complex(lhs), complex(pref * th / den)


# ---------------------------------------------------------------- small-kappa expansion

def a_plus(kappa: float, z) -> complex:
    if kappa <= 0:
        raise SpecfunError("a_plus: kappa must be > 0")
    z = complex(z)
    return complex(-math.pi ** 2 / (6 * kappa) - (z - 0.5) * math.log(kappa) - (log_gamma(z) - 0.5 * LOG_2PI))


def a_minus(kappa: float, z) -> complex:
    if kappa <= 0:
        raise SpecfunError("a_minus: kappa must be > 0")
    z = complex(z)
    return complex(math.pi ** 2 / (12 * kappa) - (z - 0.5) * math.log(2.0))


@dataclass(frozen=True)
class QExpansionResult:
    value: complex
    leading: complex
    correction: complex
    error_measured: float


def _wrap_imag(w: complex) -> complex:
    # logs are defined modulo 2 pi i
    return complex(w.real, math.remainder(w.imag, 2 * math.pi))


def qpoch_asymptotic(kappa: float, z, sign: str = "plus", m: int = 1) -> QExpansionResult:
    """Compare log(+-q^z; q)_inf, q = e^{-kappa}, with its small-kappa expansion to order m."""
    z = complex(z)
    if not 0 < kappa < 1:
        raise SpecfunError("qpoch_asymptotic: kappa must lie in (0, 1)")
    if m < 1:
        raise SpecfunError("qpoch_asymptotic: m >= 1")
    if abs(z.imag) >= 5 / kappa:
        raise SpecfunError("qpoch_asymptotic: |Im z| must be < 5/kappa")
    if sign not in ("plus", "minus"):
        raise SpecfunError("sign must be 'plus' or 'minus'")
    q = math.exp(-kappa)
    s = 1.0 if sign == "plus" else -1.0
    value = complex(log_qpoch_inf(s * np.exp(-kappa * z), q))
    leading = a_plus(kappa, z) if sign == "plus" else a_minus(kappa, z)
    corr = 0j
    for n in range(1, m):
        fac = 1.0 if sign == "plus" else (2 ** n - 1)
        corr -= fac * bernoulli_poly(n + 1, z) * float(bernoulli_number(n)) / (n * math.factorial(n + 1)) * kappa ** n
    err = abs(_wrap_imag(value - leading - corr))
    return QExpansionResult(value, leading, complex(corr), float(err))

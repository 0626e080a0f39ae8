"""Open ASEP on N sites: parameter charts, exact stationary measure, height
Laplace functionals, Gillespie simulation, the multi-species attractive
coupling and the phase diagram.

Configurations are indexed by integers: bit i-1 of the index is tau_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .query import LaplaceQuery

MAX_EXACT_SITES = 14


class AsepError(ValueError):
    pass


# ---------------------------------------------------------------- charts

def kappa_pm(q: float, x: float, y: float, sign: str = "plus") -> float:
    if not x > 0:
        raise AsepError("kappa_pm needs x > 0")
    b = 1 - q - x + y
    disc = b * b + 4 * x * y
    if disc < 0:
        raise AsepError("kappa_pm: negative discriminant")
    r = math.sqrt(disc)
    if sign == "plus":
        return (b + r) / (2 * x)
    if sign == "minus":
        # product of roots is -y/x; use it when b > 0 to avoid cancellation
        if b > 0 and y != 0:
            return -y / (x * ((b + r) / (2 * x)))
        return (b - r) / (2 * x)
    raise AsepError("sign must be 'plus' or 'minus'")


@dataclass(frozen=True)
class BoundaryParams:
    u: float
    v: float


@dataclass(frozen=True)
class AsepModel:
    n_sites: int
    q: float
    alpha: float
    beta: float
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise AsepError("n_sites must be >= 1")
        if not 0 <= self.q < 1:
            raise AsepError("q must lie in [0, 1)")
        if not (self.alpha > 0 and self.beta > 0 and self.gamma >= 0 and self.delta >= 0):
            raise AsepError("need alpha, beta > 0 and gamma, delta >= 0")
        if not (self.A > 0 and self.C > 0):
            raise AsepError("boundary chart needs A, C > 0")

    @property
    def A(self) -> float:
        return kappa_pm(self.q, self.beta, self.delta, "plus")

    @property
    def B(self) -> float:
        return kappa_pm(self.q, self.beta, self.delta, "minus")

    @property
    def C(self) -> float:
        return kappa_pm(self.q, self.alpha, self.gamma, "plus")

    @property
    def D(self) -> float:
        return kappa_pm(self.q, self.alpha, self.gamma, "minus")

    @property
    def rho_left(self) -> float:
        return 1.0 / (1.0 + self.C)

    @property
    def rho_right(self) -> float:
        return self.A / (1.0 + self.A)

    def with_sites(self, n: int) -> "AsepModel":
        return AsepModel(n, self.q, self.alpha, self.beta, self.gamma, self.delta)


def model_from_uv(N: int, bp: BoundaryParams) -> AsepModel:
    """Rates in the N^{-1/2} window around the triple point, q = exp(-2/sqrt N)."""
    if N < 1:
        raise AsepError("N must be >= 1")
    q = math.exp(-2.0 / math.sqrt(N))
    qu, qv = q ** bp.u, q ** bp.v
    return AsepModel(N, q, 1 / (1 + qu), 1 / (1 + qv), q * qu / (1 + qu), q * qv / (1 + qv))


def model_from_densities(N: int, q: float, rho_l: float, rho_r: float) -> AsepModel:
    """Model with gamma = delta = 0 whose boundary densities are (rho_l, rho_r)."""
    C = 1 / rho_l - 1
    A = rho_r / (1 - rho_r)
    return AsepModel(N, q, (1 - q) / (1 + C), (1 - q) / (1 + A), 0.0, 0.0)


# ---------------------------------------------------------------- exact solve

def all_configurations(N: int) -> np.ndarray:
    """(2^N, N) array of occupations; row k is the configuration with index k."""
    idx = np.arange(2 ** N)
    return ((idx[:, None] >> np.arange(N)[None, :]) & 1).astype(np.int8)


def _transitions(model: AsepModel):
    N = model.n_sites
    idx = np.arange(2 ** N, dtype=np.int64)
    src, dst, rate = [], [], []

    def add(mask, to, r):
        if r == 0:
            return
        src.append(idx[mask])
        dst.append(to[mask])
        rate.append(np.full(int(mask.sum()), float(r)))

    t1 = idx & 1
    add(t1 == 0, idx | 1, model.alpha)
    add(t1 == 1, idx ^ 1, model.gamma)
    for i in range(N - 1):
        a = (idx >> i) & 1
        b = (idx >> (i + 1)) & 1
        sw = idx ^ (3 << i)
        add((a == 1) & (b == 0), sw, 1.0)
        add((a == 0) & (b == 1), sw, model.q)
    tN = (idx >> (N - 1)) & 1
    add(tN == 1, idx ^ (1 << (N - 1)), model.beta)
    add(tN == 0, idx | (1 << (N - 1)), model.delta)
    return np.concatenate(src), np.concatenate(dst), np.concatenate(rate)


def build_generator(model: AsepModel) -> sps.csr_matrix:
    N = model.n_sites
    if N > MAX_EXACT_SITES:
        raise AsepError(f"state space guard: N = {N} > {MAX_EXACT_SITES}")
    s, d, r = _transitions(model)
    n = 2 ** N
    L = sps.coo_matrix((r, (s, d)), shape=(n, n)).tocsr()
    L = L - sps.diags(np.asarray(L.sum(axis=1)).ravel())
    return L.tocsr()


@dataclass(frozen=True)
class StationaryDistribution:
    probs: np.ndarray
    model: AsepModel
    residual: float = 0.0

    @property
    def n_sites(self) -> int:
        return self.model.n_sites

    def heights(self) -> np.ndarray:
        """(2^N, N+1) array of h(0..N) for every configuration."""
        tau = all_configurations(self.n_sites)
        h = np.zeros((tau.shape[0], self.n_sites + 1))
        h[:, 1:] = np.cumsum(2 * tau - 1, axis=1)
        return h


def stationary_exact(model: AsepModel) -> StationaryDistribution:
    """Solve pi L = 0, sum pi = 1 by sparse LU on L^T with one row replaced by ones."""
    L = build_generator(model)
    n = L.shape[0]
    M = L.T.tolil()
    M[n - 1, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = spla.splu(M.tocsc()).solve(rhs)
    except RuntimeError as e:  # singular factor
        raise AsepError(f"singular stationary system: {e}") from e
    res = float(np.max(np.abs(L.T @ pi)))
    if res > 1e-10 or np.min(pi) < -1e-12:
        raise AsepError(f"stationary residual {res:.3e} too large")
    pi = np.clip(pi, 0, None)
    pi /= pi.sum()
    return StationaryDistribution(pi, model, res)


def bernoulli_product(N: int, rho: float) -> np.ndarray:
    tau = all_configurations(N)
    k = tau.sum(axis=1)
    return rho ** k * (1 - rho) ** (N - k)


def generator_residual(model: AsepModel, probs: np.ndarray) -> float:
    return float(np.max(np.abs(build_generator(model).T @ probs)))


def lattice_index(N: int, X: float) -> int:
    """floor(N X) with a guard against representation error."""
    return int(math.floor(N * X + 1e-9))


def laplace_exact(dist: StationaryDistribution, query: LaplaceQuery) -> float:
    """sum_tau pi(tau) exp(-sum_k c_k H(X_k)) with H(X) = N^{-1/2} h(floor(N X))."""
    N = dist.n_sites
    h = dist.heights() / math.sqrt(N)
    expo = np.zeros(h.shape[0])
    for x, c in zip(query.X, query.c):
        expo -= c * h[:, lattice_index(N, x)]
    return float(np.dot(dist.probs, np.exp(expo)))


def laplace_increment(dist: StationaryDistribution, X: float, Xp: float, c: float) -> float:
    """E exp(-c (H(X') - H(X)))."""
    N = dist.n_sites
    h = dist.heights() / math.sqrt(N)
    inc = h[:, lattice_index(N, Xp)] - h[:, lattice_index(N, X)]
    return float(np.dot(dist.probs, np.exp(-c * inc)))


def laplace_reversed(dist: StationaryDistribution, query: LaplaceQuery) -> float:
    """Functional of the reversed profile h(N - x) - h(N), used for the duality check."""
    N = dist.n_sites
    h = dist.heights() / math.sqrt(N)
    expo = np.zeros(h.shape[0])
    for x, c in zip(query.X, query.c):
        k = lattice_index(N, x)
        expo -= c * (h[:, N - k] - h[:, N])
    return float(np.dot(dist.probs, np.exp(expo)))


def current_exact(dist: StationaryDistribution) -> float:
    m = dist.model
    tau1 = all_configurations(dist.n_sites)[:, 0]
    flux = m.alpha * (1 - tau1) - m.gamma * tau1
    return float(np.dot(dist.probs, flux) / (1 - m.q))


# ---------------------------------------------------------------- simulation

@numba.njit(cache=True)
def _gillespie_chunk(tau, rates_par, u, t, t_max, ev, max_ev, occ_int, injected, hist, ck_every, ck_t, ck_inj, ck_n):
    # rates_par = (alpha, beta, gamma, delta, q)
    N = tau.shape[0]
    alpha, beta, gamma, delta, q = rates_par[0], rates_par[1], rates_par[2], rates_par[3], rates_par[4]
    rates = np.empty(N + 1)
    ui = 0
    nu = u.shape[0]
    state = 0
    if hist.shape[0] > 0:
        for i in range(N):
            state |= tau[i] << i
    while ui + 1 < nu:
        if ev >= max_ev:
            break
        # move 0: left boundary, 1..N-1: bonds, N: right boundary
        total = 0.0
        rates[0] = gamma if tau[0] == 1 else alpha
        total += rates[0]
        for i in range(N - 1):
            a = tau[i]
            b = tau[i + 1]
            if a == 1 and b == 0:
                r = 1.0
            elif a == 0 and b == 1:
                r = q
            else:
                r = 0.0
            rates[i + 1] = r
            total += r
        rates[N] = beta if tau[N - 1] == 1 else delta
        total += rates[N]
        dt = -math.log(1.0 - u[ui]) / total
        ui += 1
        if t + dt > t_max:
            dt = t_max - t
            for i in range(N):
                occ_int[i] += tau[i] * dt
            if hist.shape[0] > 0:
                hist[state] += dt
            t = t_max
            break
        for i in range(N):
            occ_int[i] += tau[i] * dt
        if hist.shape[0] > 0:
            hist[state] += dt
        t += dt
        target = u[ui] * total
        ui += 1
        acc = 0.0
        k = N
        for j in range(N + 1):
            acc += rates[j]
            if target < acc and rates[j] > 0:
                k = j
                break
        if k == 0:
            if tau[0] == 1:
                tau[0] = 0
                injected -= 1
            else:
                tau[0] = 1
                injected += 1
        elif k == N:
            tau[N - 1] = 1 - tau[N - 1]
        else:
            a = tau[k - 1]
            tau[k - 1] = tau[k]
            tau[k] = a
        if hist.shape[0] > 0:
            state = 0
            for i in range(N):
                state |= tau[i] << i
        ev += 1
        if ck_every > 0 and ev % ck_every == 0 and ck_n < ck_t.shape[0]:
            ck_t[ck_n] = t
            ck_inj[ck_n] = injected
            ck_n += 1
    return t, ev, injected, ck_n, ui


@dataclass
class TrajectorySummary:
    final: np.ndarray
    events: int
    time: float
    occupation: np.ndarray
    injected: int
    current: float
    current_se: float
    seed: int
    histogram: Optional[np.ndarray] = None
    checkpoints: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))


def _batch_se(ck: np.ndarray, burn_frac: float, nbatch: int, scale: float) -> tuple[float, float]:
    """Current and its batch-means standard error from (time, injected) checkpoints."""
    if len(ck) < nbatch + 2:
        return float("nan"), float("nan")
    start = int(burn_frac * len(ck))
    sub = ck[start:]
    edges = np.linspace(0, len(sub) - 1, nbatch + 1).astype(int)
    vals = []
    for a, b in zip(edges[:-1], edges[1:]):
        dt = sub[b, 0] - sub[a, 0]
        vals.append((sub[b, 1] - sub[a, 1]) / dt * scale)
    vals = np.array(vals)
    tot_dt = sub[-1, 0] - sub[0, 0]
    mean = (sub[-1, 1] - sub[0, 1]) / tot_dt * scale
    return float(mean), float(np.std(vals, ddof=1) / math.sqrt(nbatch))


def simulate(model: AsepModel, t_max: float, seed: int, init: Optional[Sequence[int]] = None,
             max_events: Optional[int] = None, burn_in: float = 0.0, histogram: bool = False,
             n_checkpoints: int = 2000, chunk: int = 1 << 16) -> TrajectorySummary:
    """Exact event-driven simulation with a Philox stream seeded by `seed`.

    Occupation averages and the state histogram use times after burn_in; the
    current is the net number of particles entering at site 1 per unit time
    divided by (1 - q), with a batch-means standard error (first 10% of
    checkpoints discarded).
    """
    if not t_max > 0:
        raise AsepError("t_max must be > 0")
    N = model.n_sites
    tau = np.zeros(N, dtype=np.int64) if init is None else np.array(init, dtype=np.int64)
    if tau.shape != (N,):
        raise AsepError("init has wrong length")
    rng = np.random.Generator(np.random.Philox(seed))
    par = np.array([model.alpha, model.beta, model.gamma, model.delta, model.q])
    max_ev = np.int64(max_events if max_events is not None else np.iinfo(np.int64).max)
    if histogram and N > 20:
        raise AsepError("histogram only for N <= 20")
    hist = np.zeros(2 ** N if histogram else 0)
    occ = np.zeros(N)
    est = max_events if max_events is not None else 10 ** 6
    ck_every = max(1, int(est // n_checkpoints))
    ck_t = np.zeros(n_checkpoints + 1)
    ck_inj = np.zeros(n_checkpoints + 1, dtype=np.int64)
    t, ev, inj, ck_n = 0.0, np.int64(0), np.int64(0), 0
    phases = [(burn_in, False), (t_max, True)] if burn_in > 0 else [(t_max, True)]
    occ_start = 0.0
    for t_end, record in phases:
        if not record:
            hist_p, occ_p = np.zeros_like(hist), np.zeros(N)
        else:
            hist_p, occ_p = hist, occ
            occ_start = t
        while t < t_end and ev < max_ev:
            u = rng.random(2 * chunk)
            t, ev, inj, ck_n, _ = _gillespie_chunk(tau, par, u, t, t_end, ev, max_ev, occ_p, inj, hist_p,
                                                    ck_every, ck_t, ck_inj, ck_n)
    span = t - occ_start
    ck = np.column_stack([ck_t[:ck_n], ck_inj[:ck_n]])
    cur, se = _batch_se(ck, 0.1, 20, 1.0 / (1 - model.q))
    return TrajectorySummary(tau.astype(np.int8), int(ev), float(t), occ / span if span > 0 else occ,
                             int(inj), cur, se, seed, hist / span if histogram and span > 0 else None, ck)


# ---------------------------------------------------------------- multi-species coupling

def _species_rates(models: Sequence[AsepModel]):
    """Boundary rate tables for the M+1 species process.

    left[A, B], right[A, B] are the rates for the species at site 1 / site N to
    change from A to B (species 1..M+1, M+1 = hole).
    """
    M = len(models)
    al = [0.0] + [m.alpha for m in models]
    ga = [m.gamma for m in models] + [0.0]
    be = [m.beta for m in models] + [0.0]
    de = [0.0] + [m.delta for m in models]
    # al[k] = alpha^k (k = 0..M), ga[k-1] = gamma^k (k = 1..M+1)
    left = np.zeros((M + 2, M + 2))
    right = np.zeros((M + 2, M + 2))
    for A in range(1, M + 2):
        for B in range(1, M + 2):
            if B < A:
                left[A, B] = al[B] - al[B - 1]
                right[A, B] = de[B] - de[B - 1]
            elif B > A:
                # telescoping to gamma^i / beta^i needs gamma^{B-1} - gamma^B
                left[A, B] = ga[B - 2] - ga[B - 1]
                right[A, B] = be[B - 2] - be[B - 1]
    return left, right


def check_monotone(models: Sequence[AsepModel]) -> None:
    for m1, m2 in zip(models[:-1], models[1:]):
        if m1.n_sites != m2.n_sites or m1.q != m2.q:
            raise AsepError("coupled models must share N and q")
        if not (m1.alpha <= m2.alpha and m1.beta >= m2.beta and m1.gamma >= m2.gamma and m1.delta <= m2.delta):
            raise AsepError("rates must satisfy alpha, delta nondecreasing and beta, gamma nonincreasing")


def species_generator(models: Sequence[AsepModel]) -> sps.csr_matrix:
    """Generator of the M+1 species process over (M+1)^N states (tiny N only)."""
    check_monotone(models)
    M = len(models)
    N = models[0].n_sites
    q = models[0].q
    S = M + 1
    if S ** N > 20000:
        raise AsepError("species state space too large")
    left, right = _species_rates(models)
    states = list(np.ndindex(*([S] * N)))
    index = {st: i for i, st in enumerate(states)}
    rows, cols, vals = [], [], []
    for i, st in enumerate(states):
        eta = [x + 1 for x in st]

        def push(new, r):
            if r > 0:
                rows.append(i)
                cols.append(index[tuple(x - 1 for x in new)])
                vals.append(r)

        for x in range(N - 1):
            A, B = eta[x], eta[x + 1]
            if A != B:
                new = eta.copy()
                new[x], new[x + 1] = B, A
                push(new, 1.0 if A < B else q)
        for B in range(1, S + 1):
            if B != eta[0]:
                new = eta.copy()
                new[0] = B
                push(new, left[eta[0], B])
            if B != eta[-1]:
                new = eta.copy()
                new[-1] = B
                push(new, right[eta[-1], B])
    n = len(states)
    L = sps.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    L = L - sps.diags(np.asarray(L.sum(axis=1)).ravel())
    return L.tocsr(), states


def projected_generator(models: Sequence[AsepModel], level: int) -> tuple[np.ndarray, bool]:
    """Lump the species generator onto tau^level; returns (matrix, lumpable)."""
    L, states = species_generator(models)
    N = models[0].n_sites
    L = L.toarray()
    proj = np.array([sum(((x + 1) <= level) << k for k, x in enumerate(st)) for st in states])
    n = 2 ** N
    out = np.full((n, n), np.nan)
    ok = True
    for i in range(L.shape[0]):
        row = np.zeros(n)
        np.add.at(row, proj, L[i])
        if np.all(np.isnan(out[proj[i]])):
            out[proj[i]] = row
        elif not np.allclose(out[proj[i]], row, rtol=0, atol=1e-14):
            ok = False
    return out, ok


@numba.njit(cache=True)
def _coupled_chunk(eta, left, right, q, u, t, t_max, ev, max_ev, S, levels_ok):
    N = eta.shape[0]
    nmoves = (N - 1) + 2 * S
    rates = np.empty(nmoves)
    ui = 0
    while ui + 1 < u.shape[0] and ev < max_ev:
        total = 0.0
        for x in range(N - 1):
            A = eta[x]
            B = eta[x + 1]
            r = 0.0
            if A < B:
                r = 1.0
            elif A > B:
                r = q
            rates[x] = r
            total += r
        for B in range(1, S + 1):
            rates[N - 1 + B - 1] = left[eta[0], B] if B != eta[0] else 0.0
            rates[N - 1 + S + B - 1] = right[eta[N - 1], B] if B != eta[N - 1] else 0.0
            total += rates[N - 1 + B - 1] + rates[N - 1 + S + B - 1]
        dt = -math.log(1.0 - u[ui]) / total
        ui += 1
        if t + dt > t_max:
            t = t_max
            break
        t += dt
        target = u[ui] * total
        ui += 1
        acc = 0.0
        k = nmoves - 1
        for j in range(nmoves):
            acc += rates[j]
            if target < acc and rates[j] > 0:
                k = j
                break
        if k < N - 1:
            a = eta[k]
            eta[k] = eta[k + 1]
            eta[k + 1] = a
        elif k < N - 1 + S:
            eta[0] = k - (N - 1) + 1
        else:
            eta[N - 1] = k - (N - 1) - S + 1
        ev += 1
        # ordering of the marginals tau^i = 1{eta <= i} is automatic; recheck anyway
        for x in range(N):
            if eta[x] < 1 or eta[x] > S:
                levels_ok[0] = 0
    return t, ev, ui


@dataclass
class CoupledSummary:
    final_eta: np.ndarray
    marginals: np.ndarray  # (M, N) final tau^i
    events: int
    time: float
    ordered: bool
    occupation: np.ndarray  # (M, N) time-averaged tau^i


def simulate_coupled(models: Sequence[AsepModel], t_max: float, seed: int,
                     init: Optional[Sequence[Sequence[int]]] = None, max_events: Optional[int] = None,
                     check_every: int = 1) -> CoupledSummary:
    """Multi-species simulation; the marginals tau^i are checked for ordering after every event."""
    check_monotone(models)
    M = len(models)
    N = models[0].n_sites
    S = M + 1
    if init is None:
        eta = np.full(N, S, dtype=np.int64)
    else:
        taus = np.array(init, dtype=np.int64)
        if taus.shape != (M, N) or np.any(np.diff(taus, axis=0) < 0):
            raise AsepError("initial configurations must be ordered tau^1 <= ... <= tau^M")
        # species = smallest i with tau^i = 1, else hole
        eta = np.where(taus.any(axis=0), np.argmax(taus, axis=0) + 1, S).astype(np.int64)
    left, right = _species_rates(models)
    rng = np.random.Generator(np.random.Philox(seed))
    max_ev = np.int64(max_events if max_events is not None else np.iinfo(np.int64).max)
    t, ev = 0.0, np.int64(0)
    ok = np.ones(1, dtype=np.int64)
    ordered = True
    levels = np.arange(1, M + 1)[:, None]
    occ = np.zeros((M, N))
    tau = (eta[None, :] <= levels).astype(np.int8)
    while t < t_max and ev < max_ev:
        step_cap = min(max_ev, ev + check_every)
        u = rng.random(2 * check_every + 2)
        t_prev, tau_prev = t, tau
        t, ev, _ = _coupled_chunk(eta, left, right, models[0].q, u, t, t_max, ev, np.int64(step_cap), S, ok)
        # exact time weighting when check_every = 1 (one event per call)
        occ += tau_prev * (t - t_prev)
        tau = (eta[None, :] <= levels).astype(np.int8)
        if np.any(np.diff(tau, axis=0) < 0) or ok[0] == 0:
            ordered = False
            break
    return CoupledSummary(eta.copy(), tau, int(ev), float(t), ordered, occ / t if t > 0 else occ)


# ---------------------------------------------------------------- phase diagram

PHASES = ("MaximalCurrent", "LowDensity", "HighDensity")


class PhaseBoundaryError(AsepError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    phase: str
    current: float
    region: str  # "fan" or "shock"


def phase_point(rho_l: float, rho_r: float, tol: float = 1e-12) -> PhasePoint:
    if not (0 < rho_l < 1 and 0 < rho_r < 1):
        raise AsepError("densities must lie in (0, 1)")
    if abs(rho_l - 0.5) < tol and rho_r <= 0.5 or abs(rho_r - 0.5) < tol and rho_l >= 0.5 \
            or abs(rho_l + rho_r - 1) < tol and (rho_l < 0.5 or rho_r > 0.5):
        raise PhaseBoundaryError(f"({rho_l}, {rho_r}) lies on a phase boundary")
    # fan when rho_l > rho_r (AC < 1), shock otherwise
    region = "fan" if rho_l > rho_r else "shock"
    if rho_l > 0.5 and rho_r < 0.5:
        return PhasePoint("MaximalCurrent", 0.25, region)
    if rho_l < 0.5 and rho_l + rho_r < 1:
        return PhasePoint("LowDensity", rho_l * (1 - rho_l), region)
    return PhasePoint("HighDensity", rho_r * (1 - rho_r), region)


@dataclass(frozen=True)
class PhaseEstimate:
    point: PhasePoint
    current: float
    current_se: float
    events: int
    seed: int


def phase_mc(rho_l: float, rho_r: float, N: int, q: float, seed: int, events: int = 10 ** 6) -> PhaseEstimate:
    """Simulated J_N next to the phase-diagram prediction.

    The start is Bernoulli at the predicted bulk density, which shortens the
    transient; the first 10% of checkpoints are dropped by the estimator.
    """
    point = phase_point(rho_l, rho_r)
    rho = {"MaximalCurrent": 0.5, "LowDensity": rho_l, "HighDensity": rho_r}[point.phase]
    init = (np.random.Generator(np.random.Philox(seed + 2 ** 32)).random(N) < rho).astype(np.int64)
    s = simulate(model_from_densities(N, q, rho_l, rho_r), math.inf, seed, init=init, max_events=events)
    return PhaseEstimate(point, s.current, s.current_se, s.events, seed)

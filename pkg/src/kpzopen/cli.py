"""Command-line front end: experiment runners, sweeps and CSV/JSON emission."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import metadata
from typing import Callable, Optional, Sequence

import numpy as np

from . import asep, askey_wilson as aw, cdh, kpz, specfun
from . import measure as ms
from .query import LaplaceQuery, NestingError, QueryError

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("stationary", "simulate", "coupled", "phase-scan", "phi-n", "phi-limit", "convergence",
            "cdh-table", "verify")
REQUIRED = {
    "stationary": ("u", "v", "n_sites"),
    "simulate": ("u", "v", "n_sites"),
    "coupled": ("u", "v", "n_sites"),
    "phase-scan": (),
    "phi-n": ("u", "v", "n_sites", "x", "c"),
    "phi-limit": ("u", "v", "x", "c"),
    "convergence": ("u", "v", "x", "c"),
    "cdh-table": ("u", "v"),
    "verify": (),
}


class ConfigError(ValueError):
    pass


class InvariantFailure(RuntimeError):
    pass


@dataclass
class RunConfig:
    command: str
    params: dict

    def get(self, key: str, default=None):
        v = self.params.get(key)
        return default if v is None else v

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command}")
        for key in REQUIRED[self.command]:
            if self.params.get(key) is None:
                raise ConfigError(f"missing required key '{key.replace('_', '-')}' for {self.command}")
        tol = self.params.get("tol")
        if tol is not None and not tol > 0:
            raise ConfigError("tol must be > 0")
        out = self.params.get("out")
        if out:
            parent = os.path.dirname(os.path.abspath(out))
            if not os.access(parent, os.W_OK):
                raise ConfigError(f"output directory {parent} is not writable")


@dataclass
class ResultRecord:
    command: str
    inputs: dict
    tables: dict = field(default_factory=dict)   # name -> list of row dicts
    residuals: dict = field(default_factory=dict)
    seed: Optional[int] = None
    version: str = ""
    quadrature: Optional[dict] = None
    passed: bool = True


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _workers() -> int:
    env = os.environ.get("KPZ_STATIONARY_THREADS")
    cpu = os.cpu_count() or 1
    if env is None:
        return cpu
    try:
        n = int(env)
    except ValueError as e:
        raise ConfigError("KPZ_STATIONARY_THREADS must be an integer") from e
    if n < 1:
        raise ConfigError("KPZ_STATIONARY_THREADS must be >= 1")
    return min(n, cpu)


def _pmap(f: Callable, items: Sequence) -> list:
    """Ordered map; parallel when more than one worker is allowed."""
    n = min(_workers(), len(items))
    if n <= 1:
        return [f(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as ex:
        return list(ex.map(f, items))


# ---------------------------------------------------------------- formatting

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _csv_table(rows: list) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    cols = list(rows[0].keys())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def render(rec: ResultRecord, fmt: str) -> dict:
    """Rendered outputs keyed by table name ('' for the single JSON document)."""
    if fmt == "json":
        return {"": json.dumps(_jsonable(asdict(rec)), indent=2, sort_keys=True) + "\n"}
    out = {name: _csv_table(rows) for name, rows in rec.tables.items()}
    summary = [{"name": k, "value": v} for k, v in rec.residuals.items()]
    summary += [{"name": "passed", "value": rec.passed}, {"name": "version", "value": rec.version}]
    if rec.seed is not None:
        summary.append({"name": "seed", "value": rec.seed})
    for k, v in (rec.quadrature or {}).items():
        summary.append({"name": f"quadrature.{k}", "value": v})
    for k, v in rec.inputs.items():
        summary.append({"name": f"input.{k}", "value": v if not isinstance(v, (list, tuple)) else " ".join(map(_fmt, v))})
    out["summary"] = _csv_table(summary)
    return out


def emit(rec: ResultRecord, fmt: str, out: Optional[str]) -> None:
    docs = render(rec, fmt)
    if out is None:
        for name, text in docs.items():
            if name:
                sys.stdout.write(f"# {name}\n")
            sys.stdout.write(text)
        return
    stem, ext = os.path.splitext(out)
    first = True
    for name, text in docs.items():
        path = out if first else f"{stem}.{name}{ext}"
        first = False
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


# ---------------------------------------------------------------- helpers

def _query(cfg: RunConfig) -> LaplaceQuery:
    X, c = cfg.get("x"), cfg.get("c")
    if len(X) != len(c):
        raise ConfigError("--x and --c need the same number of entries")
    d = cfg.get("d")
    if d is not None and d != len(X):
        raise ConfigError(f"--d = {d} but {len(X)} locations given")
    return LaplaceQuery(tuple(X), tuple(c))


def _spec(cfg: RunConfig, base: Optional[ms.QuadratureSpec] = None) -> ms.QuadratureSpec:
    spec = base or ms.QuadratureSpec()
    tol = cfg.get("tol")
    if tol is not None:
        spec = ms.QuadratureSpec(spec.panels, spec.nodes_per_panel, spec.cutoff, tol, spec.grading)
    return spec


def _single(cfg: RunConfig, key: str) -> float:
    v = cfg.get(key)
    if len(v) != 1:
        raise ConfigError(f"--{key} takes a single value for {cfg.command}")
    return v[0]


def _bp(cfg: RunConfig) -> asep.BoundaryParams:
    return asep.BoundaryParams(_single(cfg, "u"), _single(cfg, "v"))


def _record(cfg: RunConfig, **kw) -> ResultRecord:
    inputs = {k: v for k, v in sorted(cfg.params.items()) if v is not None and k not in ("out", "format")}
    return ResultRecord(cfg.command, inputs, version=_version(), **kw)


# ---------------------------------------------------------------- commands

def cmd_stationary(cfg: RunConfig) -> ResultRecord:
    N = cfg.get("n_sites")
    bp = _bp(cfg)
    model = asep.model_from_uv(N, bp)
    dist = asep.stationary_exact(model)
    conf = asep.all_configurations(N)
    product = None
    if bp.u + bp.v == 0:
        product = asep.bernoulli_product(N, model.rho_left)
    rows = []
    for i, p in enumerate(dist.probs):
        row = {"index": i, "configuration": "".join(map(str, conf[i])), "probability": p,
               "residual": dist.residual}
        if product is not None:
            row["product_bernoulli"] = product[i]
        rows.append(row)
    X = cfg.get("x") or [k / 4 for k in range(1, 5)]
    c = cfg.get("c") or [0.5]
    lap = []
    for x in X:
        for cv in c:
            lap.append({"X": x, "c": cv, "laplace": asep.laplace_exact(dist, LaplaceQuery((x,), (cv,))),
                        "residual": dist.residual})
    res = {"generator_residual": asep.generator_residual(model, dist.probs), "current_J_N": asep.current_exact(dist)}
    return _record(cfg, tables={"distribution": rows, "laplace": lap}, residuals=res)


def cmd_simulate(cfg: RunConfig) -> ResultRecord:
    N, seed = cfg.get("n_sites"), cfg.get("seed", 0)
    model = asep.model_from_uv(N, _bp(cfg))
    s = asep.simulate(model, cfg.get("t_max", math.inf), seed, max_events=cfg.get("events", 10 ** 5))
    rows = [{"site": k + 1, "occupation": o, "final": int(f)} for k, (o, f) in enumerate(zip(s.occupation, s.final))]
    res = {"events": s.events, "time": s.time, "current": s.current, "current_se": s.current_se}
    return _record(cfg, tables={"occupation": rows}, residuals=res, seed=seed)


def cmd_coupled(cfg: RunConfig) -> ResultRecord:
    N, seed = cfg.get("n_sites"), cfg.get("seed", 0)
    us, vs = cfg.get("u"), cfg.get("v")
    if len(us) != len(vs):
        raise ConfigError("coupled needs as many --u as --v values (one per species)")
    models = [asep.model_from_uv(N, asep.BoundaryParams(u, v)) for u, v in zip(us, vs)]
    try:
        asep.check_monotone(models)
    except asep.AsepError as e:
        raise ConfigError(str(e)) from e
    s = asep.simulate_coupled(models, cfg.get("t_max", math.inf), seed, max_events=cfg.get("events", 10 ** 5))
    rows = [{"level": i + 1, "site": k + 1, "occupation": s.occupation[i, k], "final": int(s.marginals[i, k])}
            for i in range(len(models)) for k in range(N)]
    res = {"events": s.events, "time": s.time, "ordered": s.ordered}
    return _record(cfg, tables={"marginals": rows}, residuals=res, seed=seed, passed=s.ordered)


def _phase_job(args):
    rl, rr, N, q, seed, events = args
    e = asep.phase_mc(rl, rr, N, q, seed, events)
    return e.current, e.current_se


def cmd_phase_scan(cfg: RunConfig) -> ResultRecord:
    grid = cfg.get("rho_grid") or [0.2, 0.5, 0.8]
    events, N, q = cfg.get("events", 0), cfg.get("n_sites", 200), cfg.get("q", 0.3)
    seed = cfg.get("seed", 0)
    rows, jobs = [], []
    for rl in grid:
        for rr in grid:
            try:
                p = asep.phase_point(rl, rr)
                rows.append({"rho_l": rl, "rho_r": rr, "phase": p.phase, "region": p.region, "J_predicted": p.current})
                if events > 0:
                    jobs.append((len(rows) - 1, (rl, rr, N, q, seed, events)))
            except asep.PhaseBoundaryError:
                rows.append({"rho_l": rl, "rho_r": rr, "phase": "boundary", "region": "", "J_predicted": None})
    for r in rows:
        r.update({"J_simulated": None, "J_se": None, "within_3se": None})
    ok = True
    for (i, _), (cur, se) in zip(jobs, _pmap(_phase_job, [j for _, j in jobs])):
        within = abs(cur - rows[i]["J_predicted"]) <= 3 * se
        ok &= within
        rows[i].update({"J_simulated": cur, "J_se": se, "within_3se": within})
    return _record(cfg, tables={"phases": rows}, seed=seed if events else None, passed=ok)


def cmd_phi_n(cfg: RunConfig) -> ResultRecord:
    N = cfg.get("n_sites")
    bp, q = _bp(cfg), _query(cfg)
    spec = _spec(cfg, aw.default_aw_spec(N))
    val = aw.phi_n(bp, N, q, spec)
    row = {"N": N, "phi_n": val, "tol": spec.rel_tol}
    if N <= 12:
        exact = asep.laplace_exact(asep.stationary_exact(asep.model_from_uv(N, bp)), q)
        row.update({"laplace_exact": exact, "abs_diff": abs(val - exact)})
    return _record(cfg, tables={"phi_n": [row]}, quadrature=asdict(spec))


def cmd_phi_limit(cfg: RunConfig) -> ResultRecord:
    bp, q = _bp(cfg), _query(cfg)
    pp = cdh.CdhProcessParams(bp.u, bp.v)
    spec = _spec(cfg)
    tag = kpz.range_tag(pp, q)
    val = kpz.phi_limit(pp, q, spec)
    row = {"phi_limit": val, "tol": spec.rel_tol, "range": tag}
    m = q.merged()
    if m.d == 1 and m.X[0] == 1.0 and bp.u > 0 and bp.v > 0 and 0 < m.c[0] < 2 * bp.u:
        sp = kpz.single_point_formula(bp.u, bp.v, m.c[0], spec)
        row.update({"single_point": sp, "abs_diff": abs(sp - val)})
    return _record(cfg, tables={"phi_limit": [row]}, quadrature=asdict(spec))


def _ladder_job(args):
    bp, N, q, tol = args
    spec = aw.default_aw_spec(N)
    if tol is not None:
        spec = ms.QuadratureSpec(spec.panels, spec.nodes_per_panel, spec.cutoff, tol, spec.grading)
    return aw.phi_n(bp, N, q, spec)


def cmd_convergence(cfg: RunConfig) -> ResultRecord:
    bp, q = _bp(cfg), _query(cfg)
    if not bp.u + bp.v > 0:
        raise ConfigError("convergence needs u + v > 0")
    pp = cdh.CdhProcessParams(bp.u, bp.v)
    tag = kpz.range_tag(pp, q)
    spec = _spec(cfg)
    lim = kpz.phi_limit(pp, q, spec)
    Ns = cfg.get("ladder") or [16, 64, 256, 1024]
    vals = _pmap(_ladder_job, [(bp, N, q, cfg.get("tol")) for N in Ns])
    rows = [{"N": N, "phi_n": v, "phi_limit": lim, "abs_diff": abs(v - lim), "tol": spec.rel_tol}
            for N, v in zip(Ns, vals)]
    mono = all(b["abs_diff"] < a["abs_diff"] for a, b in zip(rows[:-1], rows[1:]))
    return _record(cfg, tables={"convergence": rows}, residuals={"monotone": mono, "range": tag},
                   quadrature=asdict(spec))


def cmd_cdh_table(cfg: RunConfig) -> ResultRecord:
    pp = cdh.CdhProcessParams(_single(cfg, "u"), _single(cfg, "v"))
    times = cfg.get("time") or [0.0]
    r = np.asarray(cfg.get("r_grid") or np.round(np.linspace(0.25, 40.0, 160), 12), dtype=float)
    dens, atoms = [], []
    for s in times:
        vals = cdh.marginal_density(pp, s, r)
        dens += [{"s": s, "r": float(x), "density": float(y)} for x, y in zip(r, vals)]
        g = cdh.atom_grid(pp, s)
        atoms += [{"s": s, "flavor": g.flavor, "location": x, "mass": math.exp(lm)}
                  for x, lm in zip(g.locations, g.log_masses)]
    tables = {"density": dens}
    if atoms:
        tables["atoms"] = atoms
    return _record(cfg, tables=tables)


# ---------------------------------------------------------------- verify

VERIFY_CDH = [(0.5, 1.0, 1.5), (0.3, 1 + 0.7j, 1 - 0.7j), (-1.3, 2.0, 2.5), (-1.5, 0.5, 0.8)]
VERIFY_WILSON = [(0.3, 0.6, 0.9, 1.2), (0.4 + 0.5j, 0.4 - 0.5j, 0.7, 1.1), (-0.6, 1.0, 1.3, 1.7),
                 (-1.2, 0.2, 0.5, 1.5)]


def _perturbed(mu: ms.MixedMeasure, eps: float) -> ms.MixedMeasure:
    # negative control: scale the continuous part by (1 + eps)
    return mu.tilt(lambda x: np.full(np.shape(x), math.log1p(eps))) if mu.has_density else mu


def verify_suite(tol: float, perturbation: float = 0.0) -> list[dict]:
    rows = []

    def add(name, residual, threshold):
        rows.append({"invariant": name, "residual": residual, "threshold": threshold,
                     "pass": bool(np.isfinite(residual) and residual <= threshold)})

    # theta identities
    worst = 0.0
    for kappa in (0.05, 0.2):
        for z in (0.3 + 0.1j, 0.7, 0.45 - 0.2j):
            for neg in (False, True):
                a, b = specfun.theta_identity_sides(kappa, z, neg)
                worst = max(worst, abs(a - b) / abs(b))
    add("theta identities", worst, 1e-9)
    # q-Pochhammer error order
    ks = 2.0 ** -np.arange(3, 11)
    worst_order = math.inf
    for z in (1.3, 0.4 + 0.7j, -0.2 + 0.1j):
        errs = [specfun.qpoch_asymptotic(k, z).error_measured for k in ks]
        worst_order = min(worst_order, float(np.polyfit(np.log(ks), np.log(errs), 1)[0]))
    add("q-Pochhammer error order (>= 0.9)", max(0.0, 0.9 - worst_order), 0.0)
    # normalizations
    spec = ms.QuadratureSpec()
    for args in VERIFY_CDH:
        mu = _perturbed(cdh.cdh(*args), perturbation)
        add(f"CDH mass {args}", abs(ms.total_mass(mu, spec) - 1), max(tol, 1e-6))
    for args in VERIFY_WILSON:
        mu = _perturbed(cdh.wilson_measure(*args), perturbation)
        add(f"Wilson mass {args}", abs(ms.total_mass(mu, spec) - 1), max(tol, 1e-6))
    pp_aw = aw.AwProcessParams.from_model(asep.model_from_uv(16, asep.BoundaryParams(2, -0.6)))
    mu = _perturbed(aw.aw_marginal(pp_aw, 0.9), perturbation)
    add("AW atomic marginal mass", abs(ms.total_mass(mu, aw.default_aw_spec(16)) - 1), max(tol, 1e-6))
    # Chapman-Kolmogorov (AW) and structural zeros (CDH)
    add("AW Chapman-Kolmogorov (u, v) = (2, -0.6)",
        aw.aw_check_consistency(pp_aw, 0.75, 0.85, 0.95, [-0.8, 0.0, 0.5, 0.95]), 1e-5)
    zs = [cdh.structural_zeros(cdh.CdhProcessParams(u, v), s, t)
          for u, v, s, t in ((2.0, -0.6, 0.3, 1.0), (-0.6, 2.0, 0.3, 1.7))]
    vals = [abs(x) for d in zs for v in d.values() for x in v]
    add("CDH structural zeros", max(vals, default=0.0), 0.0)
    # coupling
    bps = [asep.BoundaryParams(0, 1), asep.BoundaryParams(0.5, 0.4), asep.BoundaryParams(1.2, -0.3)]
    worst = 0.0
    for lv in (1, 2, 3):
        ms2 = [asep.model_from_uv(2, b) for b in bps]
        P, ok = asep.projected_generator(ms2, lv)
        G = asep.build_generator(ms2[lv - 1]).toarray()
        worst = max(worst, float(np.max(np.abs(P - G))) if ok else math.inf)
    add("coupling projection N = 2", worst, 1e-13)
    s = asep.simulate_coupled([asep.model_from_uv(20, b) for b in bps], math.inf, 1, max_events=20000)
    add("coupling ordering N = 20", 0.0 if s.ordered else 1.0, 0.0)
    # Brownian product measure
    m = asep.model_from_uv(8, asep.BoundaryParams(1.0, -1.0))
    add("Bernoulli product stationary N = 8",
        asep.generator_residual(m, asep.bernoulli_product(8, m.rho_left)), 1e-12)
    return rows


def cmd_verify(cfg: RunConfig) -> ResultRecord:
    rows = verify_suite(cfg.get("tol", 1e-6), cfg.get("inject_perturbation", 0.0))
    ok = all(r["pass"] for r in rows)
    return _record(cfg, tables={"verify": rows}, passed=ok)


HANDLERS = {
    "stationary": cmd_stationary, "simulate": cmd_simulate, "coupled": cmd_coupled,
    "phase-scan": cmd_phase_scan, "phi-n": cmd_phi_n, "phi-limit": cmd_phi_limit,
    "convergence": cmd_convergence, "cdh-table": cmd_cdh_table, "verify": cmd_verify,
}


# ---------------------------------------------------------------- argument parsing

def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected numbers, got {text!r}") from e


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from e


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--u", type=_floats, help="boundary parameter u (comma list for coupled)")
    common.add_argument("--v", type=_floats, help="boundary parameter v (comma list for coupled)")
    common.add_argument("--n-sites", type=int)
    common.add_argument("--d", type=int, help="number of query points (checked against --x)")
    common.add_argument("--x", type=_floats, help="locations X_1 < ... < X_d")
    common.add_argument("--c", type=_floats, help="Laplace variables c_1..c_d")
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float, help="quadrature relative tolerance / verify threshold")
    common.add_argument("--out", help="output path; extra tables go next to it")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--events", type=int, help="event budget for simulations")
    common.add_argument("--t-max", type=float)
    common.add_argument("--q", type=float, help="asymmetry for phase-scan")
    common.add_argument("--rho-grid", type=_floats)
    common.add_argument("--ladder", type=_ints, help="N values for convergence")
    common.add_argument("--time", type=_floats, help="CDH times for cdh-table")
    common.add_argument("--r-grid", type=_floats)
    common.add_argument("--inject-perturbation", type=float, default=None,
                        help="verify: scale fixture densities by 1 + eps (negative control)")
    p = _Parser(prog="kpzopen", description="Open ASEP / KPZ stationary-measure experiments")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def _int_param(cfg: RunConfig, key: str) -> None:
    v = cfg.params.get(key)
    if v is not None and v < 1:
        raise ConfigError(f"{key.replace('_', '-')} must be >= 1")


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        params = {k: v for k, v in vars(ns).items() if k != "command"}
        cfg = RunConfig(ns.command, params)
        cfg.validate()
        _int_param(cfg, "n_sites")
        rec = HANDLERS[cfg.command](cfg)
        emit(rec, cfg.get("format", "csv"), cfg.get("out"))
    except (ConfigError, QueryError, NestingError, kpz.RangeError, cdh.CdhError, aw.AdmissibilityError,
            asep.PhaseBoundaryError, specfun.SpecfunError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, ms.MeasureError, asep.AsepError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    if not rec.passed:
        print("invariant failure", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Experiment orchestration.

Configs run through per-kind runners into report rows with pass/fail
verdicts; results are cached under a hash of the canonical config."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from . import bellman
from .lpnorm import MultiplierOperator, resolution_sweep
from .martingale import LEVEL, optimize_tree
from .multipliers import Counterexample, PowerQuotient, lattice_table, \
    symbol_from_json
from .properties import run_check
from .spaces import SCALAR, SpaceSpec, p_star
from .symbolsets import CoefficientSet, convex_hull

KINDS = ("IdentityCheck", "BellmanSweep", "CounterexampleSweep",
         "PropertySuite")
METHODS = ("martingale", "bellman", "fft", "analytic", "verdict")
CSV_COLUMNS = ("experiment_id", "quantity", "method", "value", "params_json",
               "wall_ms")
ORDER_TOL = 1e-6
GRID_TOLERANCE = 0.15


def _cnum(z):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _to_complex(z) -> complex:
    if isinstance(z, (list, tuple)):
        return complex(float(z[0]), float(z[1]))
    return complex(z)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    kind: str
    A: tuple = (-1.0, 1.0)
    p: tuple = (4.0,)
    d: Optional[int] = None
    alpha: float = 2.0
    depths: tuple = (6,)
    resolutions: tuple = (16,)
    restarts: int = 4
    seed: int = 0
    space: SpaceSpec = SCALAR
    mode: str = LEVEL
    L: float = 4.0
    M: int = 101
    bracket: Optional[tuple] = None
    symbol: Optional[dict] = None
    checks: tuple = ()
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.p if isinstance(self.p, (list, tuple)) else (self.p,)
        object.__setattr__(self, "p", tuple(float(x) for x in p))
        object.__setattr__(self, "A", tuple(_to_complex(a) for a in self.A))
        object.__setattr__(self, "depths", tuple(int(x) for x in self.depths))
        object.__setattr__(self, "resolutions",
                           tuple(int(x) for x in self.resolutions))
        object.__setattr__(self, "checks", tuple(self.checks))
        if self.bracket is not None:
            object.__setattr__(self, "bracket",
                               tuple(float(x) for x in self.bracket))
        self.validate()

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; expected one of "
                             f"{KINDS}")
        if not self.experiment_id:
            raise ValueError("experiment_id must be non-empty")
        if any(not q > 1 for q in self.p) or not self.p:
            raise ValueError("every p must exceed 1")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if any(n < 1 for n in self.depths):
            raise ValueError("depths must be positive")
        if any(n < 2 for n in self.resolutions):
            raise ValueError("resolutions must be at least 2")
        if self.kind in ("IdentityCheck", "BellmanSweep") and not self.A:
            raise ValueError("coefficient set A must be non-empty")
        if self.kind == "BellmanSweep":
            if any(a.imag for a in self.A) or len(set(self.A)) < 2:
                raise ValueError("BellmanSweep needs two distinct real "
                                 "endpoints")
            if self.M % 2 == 0 or self.M < 3:
                raise ValueError("M must be odd and at least 3")
        if self.kind == "PropertySuite" and not self.checks:
            raise ValueError("PropertySuite needs a non-empty checks list")

    # -- serialisation ------------------------------------------------------
    def to_json(self) -> dict:
        out = {
            "experiment_id": self.experiment_id, "kind": self.kind,
            "A": [_cnum(a) for a in self.A], "p": list(self.p),
            "d": self.d, "alpha": self.alpha, "depths": list(self.depths),
            "resolutions": list(self.resolutions), "restarts": self.restarts,
            "seed": self.seed, "space": self.space.to_json(),
            "mode": self.mode, "L": self.L, "M": self.M,
            "bracket": list(self.bracket) if self.bracket else None,
            "symbol": self.symbol, "checks": list(self.checks),
            "outputs": dict(self.outputs),
        }
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        obj = dict(obj)
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "space" in obj and obj["space"] is not None:
            obj["space"] = SpaceSpec.from_json(obj["space"])
        obj = {k: v for k, v in obj.items() if v is not None}
        return cls(**obj)

    def canonical(self) -> str:
        doc = self.to_json()
        doc.pop("outputs")
        return json.dumps(_normalise_numbers(doc), sort_keys=True,
                          separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _normalise_numbers(obj):
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (int, float)):
        f = float(obj)
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    if isinstance(obj, dict):
        return {k: _normalise_numbers(v) for k, v in obj.items()}
    return [_normalise_numbers(v) for v in obj]


def load_configs(path) -> list[ExperimentConfig]:
    """A config file holds one config object or a list of them."""
    doc = json.loads(Path(path).read_text())
    docs = doc if isinstance(doc, list) else [doc]
    return [ExperimentConfig.from_json(d) for d in docs]


# ---------------------------------------------------------------------------
# reports

@dataclass(frozen=True)
class ReportRow:
    experiment_id: str
    quantity: str
    method: str
    value: float
    params_json: str
    wall_ms: float

    def as_list(self) -> list:
        return [self.experiment_id, self.quantity, self.method,
                repr(float(self.value)), self.params_json,
                f"{self.wall_ms:.3f}"]

    def to_json(self) -> dict:
        return dict(zip(CSV_COLUMNS, (self.experiment_id, self.quantity,
                                      self.method, float(self.value),
                                      self.params_json, self.wall_ms)))

    @classmethod
    def from_json(cls, obj) -> "ReportRow":
        return cls(obj["experiment_id"], obj["quantity"], obj["method"],
                   float(obj["value"]), obj["params_json"],
                   float(obj["wall_ms"]))

    @property
    def passed(self) -> Optional[bool]:
        if self.method != "verdict":
            return None
        return self.value == 1.0


@dataclass
class Report:
    rows: list = field(default_factory=list)
    timing: bool = True

    def add(self, eid, quantity, method, value, params, wall_ms=0.0):
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
        self.rows.append(ReportRow(
            eid, quantity, method, float(value),
            json.dumps(params, sort_keys=True, default=str),
            float(wall_ms) if self.timing else 0.0))

    def verdict(self, eid, name, ok, params):
        self.add(eid, f"verdict:{name}", "verdict", 1.0 if ok else 0.0,
                 params)

    def extend(self, other: "Report"):
        self.rows.extend(other.rows)

    @property
    def verdicts(self) -> list[ReportRow]:
        return [r for r in self.rows if r.method == "verdict"]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.verdicts)

    def failures(self) -> list[ReportRow]:
        return [r for r in self.verdicts if not r.passed]


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ms = 1e3 * (time.perf_counter() - self.t0)


# ---------------------------------------------------------------------------
# analytic references

def unimodular_constant(p: float, space: SpaceSpec) -> Optional[float]:
    """beta_{p,X} where it is known exactly: p* - 1 for Hilbert spaces."""
    if space.exponent == 2.0:
        return p_star(p) - 1.0
    return None


def analytic_bounds(A, p: float, space: SpaceSpec = SCALAR):
    """(lower, upper, source) analytic bounds for beta^A_{p,X}.

    Singletons and p = 2 on a Hilbert space are exact; other sets use
    the real or complex sandwich in terms of beta_{p,X}.  Entries are None when no
    closed-form bound applies.
    """
    ext = convex_hull(A).extreme_points
    mod = max(abs(a) for a in ext)
    if len(ext) == 1:
        return mod, mod, "singleton"
    beta = unimodular_constant(p, space)
    if beta is None:
        return mod, None, "max-modulus"
    if p == 2.0:
        return mod, mod, "p=2 Hilbert"
    if all(a.imag == 0 for a in ext):
        b, B = min(a.real for a in ext), max(a.real for a in ext)
        lo = max((B - b) / 2 * beta, abs(b), abs(B))
        hi = min((B - b) / 2 * beta + abs(B + b) / 2, mod * beta)
        return lo, hi, "real sandwich"
    diam = max(abs(x - y) for x in ext for y in ext)
    return max(diam * beta / math.pi, mod), mod * beta, "complex sandwich"


# ---------------------------------------------------------------------------
# experiments

def _params(cfg, **kw):
    d = {"seed": cfg.seed}
    d.update(kw)
    return d


def _monotone(vals) -> bool:
    return all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def run_identity_check(cfg: ExperimentConfig, threads: int = 1,
                       timing: bool = True) -> Report:
    """Martingale and FFT lower bounds against the analytic references."""
    if cfg.kind != "IdentityCheck":
        raise ValueError("run_identity_check needs kind IdentityCheck")
    rep = Report(timing=timing)
    eid = cfg.experiment_id
    A = CoefficientSet(cfg.A)
    symbol = PowerQuotient(tuple(cfg.A), cfg.alpha)
    for p in cfg.p:
        lo, hi, src = analytic_bounds(A, p, cfg.space)
        rep.add(eid, "beta_analytic_lower", "analytic", lo,
                {"p": p, "source": src})
        if hi is not None:
            rep.add(eid, "beta_analytic_upper", "analytic", hi,
                    {"p": p, "source": src})
        mart, prev = [], None
        for depth in sorted(cfg.depths):
            with _Timer() as t:
                try:
                    est = optimize_tree(A, p, depth, cfg.space, cfg.restarts,
                                        cfg.seed, cfg.mode, warm_start=prev,
                                        threads=threads)
                except Exception as exc:
                    raise RuntimeError(f"{eid}: martingale row p={p} "
                                       f"depth={depth} failed: {exc}") from exc
            prev = est
            mart.append(est.value)
            rep.add(eid, "beta_lower", "martingale", est.value,
                    _params(cfg, p=p, depth=depth, restarts=cfg.restarts),
                    t.ms)
        with _Timer() as t:
            try:
                fft = resolution_sweep(
                    lambda N: MultiplierOperator(lattice_table(symbol, N),
                                                 cfg.space),
                    p, sorted(cfg.resolutions), cfg.restarts, cfg.seed,
                    threads=threads)
            except Exception as exc:
                raise RuntimeError(f"{eid}: fft rows p={p} failed: "
                                   f"{exc}") from exc
        fvals = [e.value for e in fft]
        for N, e in zip(sorted(cfg.resolutions), fft):
            rep.add(eid, "mult_norm_lower", "fft", e.value,
                    _params(cfg, p=p, N=N, d=symbol.dim, alpha=cfg.alpha,
                            restarts=cfg.restarts), t.ms / len(fft))
        for name, vals in (("martingale", mart), ("fft", fvals)):
            if hi is not None:
                rep.verdict(eid, f"{name}_below_upper",
                            max(vals) <= hi + ORDER_TOL,
                            {"p": p, "max": max(vals), "upper": hi})
            rep.verdict(eid, f"{name}_monotone", _monotone(vals),
                        {"p": p, "values": vals})
            if p != 2.0 and lo > max(abs(a) for a in A) + 1e-9:
                mod = max(abs(a) for a in A)
                rep.verdict(eid, f"{name}_nontrivial", min(vals) > mod,
                            {"p": p, "min": min(vals), "max_modulus": mod})
            # finite witnesses attain the constant only in these cases
            if src in ("singleton", "p=2 Hilbert"):
                rep.verdict(eid, f"{name}_exact",
                            abs(max(vals) - hi) <= ORDER_TOL,
                            {"p": p, "max": max(vals), "exact": hi})
    return rep


def run_bellman_sweep(cfg: ExperimentConfig, threads: int = 1,
                      timing: bool = True) -> Report:
    """Bellman threshold with martingale and analytic cross-checks."""
    if cfg.kind != "BellmanSweep":
        raise ValueError("run_bellman_sweep needs kind BellmanSweep")
    rep = Report(timing=timing)
    eid = cfg.experiment_id
    b = min(a.real for a in cfg.A)
    B = max(a.real for a in cfg.A)
    A = CoefficientSet([b, B])
    for p in cfg.p:
        lo_a, hi_a, src = analytic_bounds(A, p, cfg.space)
        with _Timer() as t:
            try:
                thr = bellman.beta_threshold(b, B, p, cfg.L, cfg.M,
                                             bracket=cfg.bracket)
            except bellman.InvalidBracket as exc:
                rep.verdict(eid, "bracket_valid", False,
                            {"p": p, "lo_status": exc.lo_status.value,
                             "hi_status": exc.hi_status.value})
                continue
        bracket_src = "config" if cfg.bracket else "analytic sandwich +-20%"
        rep.add(eid, "beta_hat", "bellman", thr.beta_hat,
                {"p": p, "b": b, "B": B, "L": cfg.L, "M": cfg.M,
                 "width": thr.width, "bracket": bracket_src,
                 "lo_status": thr.lo_status.value,
                 "hi_status": thr.hi_status.value}, t.ms)
        mart = 0.0
        for depth in sorted(cfg.depths):
            with _Timer() as t:
                est = optimize_tree(A, p, depth, cfg.space, cfg.restarts,
                                    cfg.seed, cfg.mode, threads=threads)
            mart = max(mart, est.value)
            rep.add(eid, "beta_lower", "martingale", est.value,
                    _params(cfg, p=p, depth=depth, restarts=cfg.restarts),
                    t.ms)
        rep.add(eid, "beta_analytic_lower", "analytic", lo_a,
                {"p": p, "source": src})
        rep.add(eid, "beta_analytic_upper", "analytic", hi_a,
                {"p": p, "source": src})
        rep.verdict(eid, "certified_ordering",
                    mart - ORDER_TOL <= thr.beta_hat + thr.width,
                    {"p": p, "martingale": mart, "beta_hat": thr.beta_hat,
                     "width": thr.width})
        rep.verdict(eid, "within_sandwich",
                    (1 - GRID_TOLERANCE) * lo_a <= thr.beta_hat
                    <= (1 + GRID_TOLERANCE) * hi_a,
                    {"p": p, "beta_hat": thr.beta_hat, "lower": lo_a,
                     "upper": hi_a, "tolerance": GRID_TOLERANCE})
        if p == 2.0:
            rep.verdict(eid, "p2_value",
                        abs(thr.beta_hat - lo_a) <= 0.05,
                        {"beta_hat": thr.beta_hat, "exact": lo_a})
    return rep


def run_counterexample_sweep(cfg: ExperimentConfig, threads: int = 1,
                             timing: bool = True) -> Report:
    if cfg.kind != "CounterexampleSweep":
        raise ValueError("run_counterexample_sweep needs kind "
                         "CounterexampleSweep")
    rep = Report(timing=timing)
    eid = cfg.experiment_id
    spec = symbol_from_json(cfg.symbol) if cfg.symbol else \
        Counterexample(cfg.d or 2)
    Ns = sorted(cfg.resolutions)
    for p in cfg.p:
        with _Timer() as t:
            ests = resolution_sweep(
                lambda N: MultiplierOperator(lattice_table(spec, N),
                                             cfg.space),
                p, Ns, cfg.restarts, cfg.seed, threads=threads)
        vals = [e.value for e in ests]
        for N, v in zip(Ns, vals):
            rep.add(eid, "mult_norm_lower", "fft", v,
                    _params(cfg, p=p, N=N, symbol=spec.to_json()),
                    t.ms / len(Ns))
        if p == 2.0:
            rep.verdict(eid, "bounded_at_p2", max(vals) <= 1 + 1e-8,
                        {"values": vals})
        else:
            rep.verdict(eid, "strictly_increasing",
                        all(b > a for a, b in zip(vals, vals[1:])),
                        {"p": p, "values": vals})
    return rep


def run_property_suite(cfg: ExperimentConfig, threads: int = 1,
                       timing: bool = True, smoke: bool = False) -> Report:
    if cfg.kind != "PropertySuite":
        raise ValueError("run_property_suite needs kind PropertySuite")
    rep = Report(timing=timing)
    eid = cfg.experiment_id
    for name in cfg.checks:
        with _Timer() as t:
            results = run_check(name, cfg.seed, smoke)
        for r in results:
            rep.add(eid, f"check:{name}", "analytic", r.value, r.params,
                    t.ms / len(results))
            rep.verdict(eid, name, r.passed, r.params)
    return rep


RUNNERS = {
    "IdentityCheck": run_identity_check,
    "BellmanSweep": run_bellman_sweep,
    "CounterexampleSweep": run_counterexample_sweep,
    "PropertySuite": run_property_suite,
}


def smoke_caps(cfg: ExperimentConfig) -> ExperimentConfig:
    """Clamp budgets to the smoke tier: depth <= 6, N <= 32, M <= 101,
    restarts <= 4."""
    depths = tuple(sorted({min(d, 6) for d in cfg.depths}))
    res = tuple(sorted({min(n, 32) for n in cfg.resolutions}))
    return replace(cfg, depths=depths, resolutions=res, M=min(cfg.M, 101),
                   restarts=min(cfg.restarts, 4))


def run_experiment(cfg: ExperimentConfig, threads: int = 1,
                   timing: bool = True, smoke: bool = False,
                   cache_dir=None) -> Report:
    if smoke:
        cfg = smoke_caps(cfg)
    if cache_dir is not None:
        hit = cache_lookup(cfg, cache_dir, smoke)
        if hit is not None:
            return hit
    runner = RUNNERS[cfg.kind]
    if cfg.kind == "PropertySuite":
        rep = runner(cfg, threads, timing, smoke)
    else:
        rep = runner(cfg, threads, timing)
    if cache_dir is not None:
        cache_store(cfg, cache_dir, rep, smoke)
    return rep


def run_batch(configs: Sequence[ExperimentConfig], threads: int = 1,
              timing: bool = True, smoke: bool = False,
              cache_dir=None) -> Report:
    """Run experiments (in parallel when threads > 1); rows keep config
    order."""
    def one(cfg):
        return run_experiment(cfg, 1, timing, smoke, cache_dir)

    if threads > 1 and len(configs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            reports = list(ex.map(one, configs))
    else:
        reports = [run_experiment(c, threads, timing, smoke, cache_dir)
                   for c in configs]
    out = Report(timing=timing)
    for r in reports:
        out.extend(r)
    return out


# ---------------------------------------------------------------------------
# emission and cache

def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow(r.as_list())
    return buf.getvalue()


def to_json_text(report: Report) -> str:
    return json.dumps([r.to_json() for r in report.rows], indent=2)


def emit(report: Report, fmt: str, path) -> Path:
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    path = Path(path)
    text = to_csv(report) if fmt == "csv" else to_json_text(report)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc
    return path


def _cache_path(cfg, cache_dir, smoke) -> Path:
    tag = "smoke" if smoke else "full"
    return Path(cache_dir) / f"{cfg.config_hash()}-{tag}.json"


def cache_lookup(cfg: ExperimentConfig, cache_dir,
                 smoke: bool = False) -> Optional[Report]:
    path = _cache_path(cfg, cache_dir, smoke)
    if not path.exists():
        return None
    doc = json.loads(path.read_text())
    if doc.get("config") != cfg.canonical():
        return None
    return Report([ReportRow.from_json(r) for r in doc["rows"]])


def cache_store(cfg: ExperimentConfig, cache_dir, report: Report,
                smoke: bool = False) -> None:
    path = _cache_path(cfg, cache_dir, smoke)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"config": cfg.canonical(),
                                "rows": [r.to_json() for r in report.rows]}))

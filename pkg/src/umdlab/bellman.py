"""Grid value iteration for the scalar A-Burkholder function, A = {b, B}.

The surface U lives on the square [-L, L]^2 sampled at M x M nodes
(``values[i, j] = U(x_i, y_j)``).  One Bellman step replaces U along
every lattice line of direction (1, eps), eps in {b, B}, by the least
concave majorant of its samples.  Chords never leave the square, so every
iterate is the value of an actual finite martingale pair living on the
grid: a grid iterate is a lower bound for the true U at its nodes, and a
positive value at the origin certifies that the trial beta is too small.
The opposite verdict (convergence) is only a heuristic certificate.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
from numba import njit

from .symbolsets import CoefficientSet

MAX_SLOPE_DENOMINATOR = 16


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    DIVERGED = "Diverged"
    MAX_ITER = "MaxIter"


def divergence_cap(L: float, p: float) -> float:
    return 1e10 * (1.0 + L ** p)


@dataclass(frozen=True, eq=False)
class BellmanGrid:
    p: float
    b: float
    B: float
    beta: float
    L: float = 4.0
    M: int = 201
    values: Optional[np.ndarray] = field(default=None, repr=False)
    cap: Optional[float] = None

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.b < self.B:
            raise ValueError("need b < B")
        if self.M < 3 or self.M % 2 == 0:
            raise ValueError("M must be odd (so that 0 is a node) and >= 3")
        if not self.L > 0 or self.beta < 0:
            raise ValueError("need L > 0 and beta >= 0")
        if self.cap is None:
            object.__setattr__(self, "cap", divergence_cap(self.L, self.p))
        if self.values is None:
            object.__setattr__(self, "values", initial_surface(self))
        elif self.values.shape != (self.M, self.M):
            raise ValueError("values must be M x M")

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.M)

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.M - 1)

    @property
    def center(self) -> int:
        return self.M // 2

    def with_values(self, values) -> "BellmanGrid":
        return replace(self, values=np.asarray(values, dtype=float))

    def at(self, x: float, y: float) -> float:
        return float(bilinear(self.values, self.L, np.array([x]),
                              np.array([y]))[0])


def initial_surface(grid: BellmanGrid) -> np.ndarray:
    """U_0(x, y) = |y|^p - beta^p |x|^p at every node."""
    x = grid.axis
    X, Y = np.meshgrid(x, x, indexing="ij")
    return np.abs(Y) ** grid.p - grid.beta ** grid.p * np.abs(X) ** grid.p


# ---------------------------------------------------------------------------
# concave envelopes along lattice lines

def lattice_direction(eps: float, max_den: int = MAX_SLOPE_DENOMINATOR):
    """Integer step (s, r) with r / s = eps; eps must be a small rational."""
    frac = Fraction(eps).limit_denominator(max_den)
    if abs(float(frac) - eps) > 1e-12:
        raise ValueError(f"slope {eps} is not a rational with denominator "
                         f"<= {max_den}; lattice lines need such slopes")
    return frac.denominator, frac.numerator


@njit(cache=True)
def _envelope_line(vals, out, idx_i, idx_j, n, hull):
    # upper concave hull of (t, vals[t]), t = 0..n-1, then interpolate
    k = 0
    for t in range(n):
        while k >= 2:
            t0 = hull[k - 2]
            t1 = hull[k - 1]
            cross = ((t1 - t0) * (vals[t] - vals[t0])
                     - (t - t0) * (vals[t1] - vals[t0]))
            if cross >= 0.0:
                k -= 1
            else:
                break
        hull[k] = t
        k += 1
    for m in range(k - 1):
        t0 = hull[m]
        t1 = hull[m + 1]
        v0 = vals[t0]
        v1 = vals[t1]
        for t in range(t0, t1 + 1):
            env = v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            cur = vals[t]
            out[idx_i[t], idx_j[t]] = env if env > cur else cur
    if k == 1:
        out[idx_i[0], idx_j[0]] = vals[0]


@njit(cache=True)
def _concavify(U, s, r):
    M = U.shape[0]
    out = U.copy()
    vals = np.empty(M)
    idx_i = np.empty(M, dtype=np.int64)
    idx_j = np.empty(M, dtype=np.int64)
    hull = np.empty(M, dtype=np.int64)
    for i0 in range(M):
        for j0 in range(M):
            pi = i0 - s
            pj = j0 - r
            if 0 <= pi < M and 0 <= pj < M:
                continue
            n = 0
            i = i0
            j = j0
            while 0 <= i < M and 0 <= j < M:
                vals[n] = U[i, j]
                idx_i[n] = i
                idx_j[n] = j
                n += 1
                i += s
                j += r
            if n >= 2:
                _envelope_line(vals, out, idx_i, idx_j, n, hull)
    return out


def directional_concavify(values: np.ndarray, eps: float) -> np.ndarray:
    """Least concave majorant along every lattice line of direction (1, eps).

    The result is pointwise >= the input and the operation is idempotent.
    """
    s, r = lattice_direction(eps)
    return _concavify(np.ascontiguousarray(values, dtype=float), s, r)


def concave_envelope_1d(samples) -> np.ndarray:
    """Least concave majorant of equally spaced 1-D samples."""
    v = np.asarray(samples, dtype=float)
    out = v[:, None].copy()
    n = v.shape[0]
    idx = np.arange(n)
    _envelope_line(v.copy(), out, idx, np.zeros(n, dtype=np.int64), n,
                   np.empty(n, dtype=np.int64))
    return out[:, 0]


def scaling_relax(values: np.ndarray, p: float) -> np.ndarray:
    """Enforce U(x, y) >= 2^-p U(2x, 2y) and U(2x, 2y) >= 2^p U(x, y).

    A pair (f, g) started at (x, y) and scaled by 2 (or 1/2) is a pair
    started at (2x, 2y) (or (x/2, y/2)) with payoff scaled by 2^p (2^-p),
    so both updates keep every node value achievable.
    """
    M = values.shape[0]
    c = M // 2
    q = c // 2
    out = values.copy()
    inner = out[c - q:c + q + 1, c - q:c + q + 1]
    outer = out[c - 2 * q:c + 2 * q + 1:2, c - 2 * q:c + 2 * q + 1:2]
    np.maximum(inner, 2.0 ** -p * outer, out=inner)
    outer = out[c - 2 * q:c + 2 * q + 1:2, c - 2 * q:c + 2 * q + 1:2]
    np.maximum(outer, 2.0 ** p * inner, out=outer)
    return out


def bellman_step(grid: BellmanGrid, use_scaling: bool = True) -> BellmanGrid:
    v = directional_concavify(grid.values, grid.b)
    v = directional_concavify(v, grid.B)
    if use_scaling:
        v = scaling_relax(v, grid.p)
    return grid.with_values(v)


# ---------------------------------------------------------------------------
# iteration

@dataclass(frozen=True)
class IterationResult:
    status: Status
    grid: BellmanGrid
    iterations: int
    sup_change: float
    origin_value: float
    history: tuple = ()

    @property
    def values(self) -> np.ndarray:
        return self.grid.values


def _origin_tol(grid: BellmanGrid) -> float:
    return 1e-9 * (1.0 + grid.L ** grid.p)


def diagonal_nodes(grid: BellmanGrid) -> tuple[np.ndarray, np.ndarray]:
    """Indices of nodes (x, a x) with a in {b, B} and a x on the grid."""
    c = grid.center
    ii, jj = [], []
    for a in (grid.b, grid.B):
        i = np.arange(grid.M)
        j = c + a * (i - c)
        ok = (np.abs(j - np.round(j)) < 1e-9) & (j > -0.5) \
            & (j < grid.M - 0.5)
        ii.append(i[ok])
        jj.append(np.round(j[ok]).astype(int))
    return np.concatenate(ii), np.concatenate(jj)


def diagonal_max(grid: BellmanGrid) -> float:
    """Largest U(x, a x), a in {b, B}; positive only if beta is too small."""
    ii, jj = diagonal_nodes(grid)
    return float(np.max(grid.values[ii, jj]))


def iterate(grid: BellmanGrid, max_iter: int = 2000, tol: float = 1e-10,
            cap: Optional[float] = None) -> IterationResult:
    """Bellman steps until the sup-norm change drops below ``tol``.

    ``Diverged`` is returned as soon as a node exceeds the cap or the value
    at the origin turns positive: U is p-homogeneous, so U(0, 0) > 0
    forces U(0, 0) = +inf for the untruncated problem.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    cap = grid.cap if cap is None else cap
    c = grid.center
    otol = _origin_tol(grid)
    hist = []
    cur = grid
    change = math.inf
    for it in range(1, max_iter + 1):
        nxt = bellman_step(cur)
        change = float(np.max(nxt.values - cur.values))
        origin = float(nxt.values[c, c])
        hist.append(change)
        cur = nxt
        if not np.all(np.isfinite(cur.values)) or np.max(cur.values) > cap \
                or diagonal_max(cur) > otol:
            return IterationResult(Status.DIVERGED, cur, it, change, origin,
                                   tuple(hist))
        if change < tol:
            return IterationResult(Status.CONVERGED, cur, it, change, origin,
                                   tuple(hist))
    return IterationResult(Status.MAX_ITER, cur, max_iter, change,
                           float(cur.values[c, c]), tuple(hist))


# ---------------------------------------------------------------------------
# threshold search

@dataclass(frozen=True)
class ThresholdResult:
    beta_hat: float
    lo: float
    hi: float
    lo_status: Status
    hi_status: Status
    probes: tuple

    @property
    def width(self) -> float:
        return self.hi - self.lo


class InvalidBracket(ValueError):
    def __init__(self, lo, hi, lo_status, hi_status):
        super().__init__(f"invalid bracket [{lo}, {hi}]: lower end "
                         f"{lo_status.value}, upper end {hi_status.value}")
        self.lo_status, self.hi_status = lo_status, hi_status


def analytic_bracket(b: float, B: float, p: float) -> tuple[float, float]:
    """Scalar sandwich for beta^{b,B}_{p,R} from the p* - 1 constant."""
    from .spaces import p_star
    base = p_star(p) - 1.0
    lo = max((B - b) / 2 * base, abs(b), abs(B))
    hi = (B - b) / 2 * base + abs(B + b) / 2
    return lo, hi


def beta_threshold(b: float, B: float, p: float, L: float = 4.0, M: int = 201,
                   bracket: Optional[tuple] = None, width: float = 1e-2,
                   max_iter: int = 2000, tol: float = 1e-10
                   ) -> ThresholdResult:
    """Bisection on beta between a diverging and a converging trial value.

    Without an explicit bracket the analytic sandwich is widened by 20%
    on both sides.  ``MaxIter`` counts as the non-diverging side.
    """
    if bracket is None:
        lo, hi = analytic_bracket(b, B, p)
        bracket = (0.8 * lo, 1.2 * hi)
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")

    def probe(beta):
        g = BellmanGrid(p, b, B, beta, L, M)
        return iterate(g, max_iter=max_iter, tol=tol)

    probes = []
    r_lo, r_hi = probe(lo), probe(hi)
    probes += [(lo, r_lo.status, r_lo.iterations),
               (hi, r_hi.status, r_hi.iterations)]
    if r_lo.status != Status.DIVERGED or r_hi.status == Status.DIVERGED:
        raise InvalidBracket(lo, hi, r_lo.status, r_hi.status)
    lo_status, hi_status = r_lo.status, r_hi.status
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        r = probe(mid)
        probes.append((mid, r.status, r.iterations))
        if r.status == Status.DIVERGED:
            lo, lo_status = mid, r.status
        else:
            hi, hi_status = mid, r.status
    return ThresholdResult(0.5 * (lo + hi), lo, hi, lo_status, hi_status,
                           tuple(probes))


# ---------------------------------------------------------------------------
# V transform and concavity diagnostics

def bilinear(values: np.ndarray, L: float, x, y) -> np.ndarray:
    """Bilinear interpolation on the [-L, L]^2 grid; NaN outside."""
    M = values.shape[0]
    h = 2.0 * L / (M - 1)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = (x + L) / h
    fy = (y + L) / h
    inside = (fx >= -1e-9) & (fx <= M - 1 + 1e-9) & (fy >= -1e-9) \
        & (fy <= M - 1 + 1e-9)
    fx = np.clip(fx, 0, M - 1)
    fy = np.clip(fy, 0, M - 1)
    i0 = np.clip(np.floor(fx).astype(int), 0, M - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, M - 2)
    tx = fx - i0
    ty = fy - j0
    v = ((1 - tx) * (1 - ty) * values[i0, j0]
         + tx * (1 - ty) * values[i0 + 1, j0]
         + (1 - tx) * ty * values[i0, j0 + 1]
         + tx * ty * values[i0 + 1, j0 + 1])
    return np.where(inside, v, np.nan)


def v_transform(values: np.ndarray, L: float, a1: float, a2: float):
    """V(x, y) = U((x - y)/2, (a2 x - a1 y)/2) on the same node set."""
    if a1 == a2:
        raise ValueError("a1 and a2 must differ")
    x = np.linspace(-L, L, values.shape[0])
    X, Y = np.meshgrid(x, x, indexing="ij")
    return bilinear(values, L, (X - Y) / 2, (a2 * X - a1 * Y) / 2)


def back_transform(vvalues: np.ndarray, L: float, a1: float, a2: float):
    """U(x, y) = V((2y - 2x a1)/(a2 - a1), (2y - 2x a2)/(a2 - a1))."""
    if a1 == a2:
        raise ValueError("a1 and a2 must differ")
    x = np.linspace(-L, L, vvalues.shape[0])
    X, Y = np.meshgrid(x, x, indexing="ij")
    d = a2 - a1
    return bilinear(np.nan_to_num(vvalues, nan=0.0), L,
                    (2 * Y - 2 * X * a1) / d, (2 * Y - 2 * X * a2) / d) \
        + _nan_mask(vvalues, L, X, Y, a1, a2)


def _nan_mask(vvalues, L, X, Y, a1, a2):
    # propagate undefined V values through the back transform
    d = a2 - a1
    m = bilinear(np.isnan(vvalues).astype(float), L,
                 (2 * Y - 2 * X * a1) / d, (2 * Y - 2 * X * a2) / d)
    return np.where(np.isnan(m) | (m > 0), np.nan, 0.0)


def midpoint_violations(values: np.ndarray, s: int, r: int,
                        concave: bool = True) -> np.ndarray:
    """(f(P - D) + f(P + D))/2 - f(P) at every node P, with index step
    D = (s, r); the sign is flipped for convexity scans.  Nodes without
    a full triple, or whose triple touches NaN, get -inf."""
    M = values.shape[0]
    out = np.full(values.shape, -np.inf)
    lo_i, hi_i = abs(s), M - abs(s)
    lo_j, hi_j = abs(r), M - abs(r)
    if lo_i >= hi_i or lo_j >= hi_j:
        return out
    c = values[lo_i:hi_i, lo_j:hi_j]
    a = values[lo_i - s:hi_i - s, lo_j - r:hi_j - r]
    b = values[lo_i + s:hi_i + s, lo_j + r:hi_j + r]
    v = 0.5 * (a + b) - c
    if not concave:
        v = -v
    out[lo_i:hi_i, lo_j:hi_j] = np.where(np.isnan(v), -np.inf, v)
    return out


def core_mask(M: int, core: float = 0.5) -> np.ndarray:
    """Nodes with |x|, |y| <= core * L.  Chords are cut off at the square's
    edge, so values next to it are less trustworthy than the core."""
    k = np.abs(np.arange(M) - M // 2) <= core * (M // 2) + 1e-9
    return k[:, None] & k[None, :]


def _index_step(c1: float, c2: float, max_den: int = 64):
    """Smallest integer node step (s, r), s >= 0, parallel to (c1, c2)."""
    if c1 == 0:
        return 0, 1
    frac = Fraction(c2 / c1).limit_denominator(max_den)
    if abs(float(frac) - c2 / c1) > 1e-12:
        raise ValueError(f"direction ({c1}, {c2}) is not a lattice "
                         "direction with small denominators")
    return frac.denominator, frac.numerator


@dataclass(frozen=True)
class ConcavityReport:
    direction: tuple
    admissible: bool
    max_violation: float
    triples: int
    informational: bool


def directional_concavity_report(vvalues: np.ndarray, c1: float, c2: float,
                                 a1: float, a2: float, core: float = 1.0
                                 ) -> ConcavityReport:
    """Midpoint-concavity scan of V along lattice lines of direction
    (c1, c2), over nodes within ``core * L`` of the origin.  Admissible
    directions, where (a2 c1 - a1 c2)/(c1 - c2) lies in Conv{a1, a2},
    must be concave; others are informational only.
    """
    if c1 == c2:
        raise ValueError("c1 == c2: the membership ratio is undefined")
    ratio = (a2 * c1 - a1 * c2) / (c1 - c2)
    admissible = CoefficientSet([a1, a2]).hull().contains(ratio)
    s, r = _index_step(c1, c2)
    viol = midpoint_violations(vvalues, s, r)
    finite = np.isfinite(viol) & core_mask(vvalues.shape[0], core)
    mx = float(np.max(viol[finite])) if finite.any() else 0.0
    return ConcavityReport((c1, c2), bool(admissible), max(mx, 0.0),
                           int(finite.sum()), not admissible)


def convexity_in_y(values: np.ndarray, core: float = 1.0) -> float:
    """Largest midpoint-convexity violation of y -> U(x, y)."""
    v = midpoint_violations(values, 0, 1, concave=False)
    v = v[np.isfinite(v) & core_mask(values.shape[0], core)]
    return max(float(v.max()), 0.0) if v.size else 0.0


def interpolation_tolerance(grid: BellmanGrid) -> float:
    """Error scale of bilinear reads: h^2/8 times a bound on |D^2 U_0|."""
    p, L = grid.p, grid.L
    curv = p * (p - 1) * max(1.0, grid.beta ** p) * L ** max(p - 2, 0)
    return grid.h ** 2 / 8 * 2 * curv


def burkholder_majorant(x, y, p: float) -> np.ndarray:
    """alpha_p (|y| - (p*-1)|x|)(|x| + |y|)^(p-1), alpha_p = p(1-1/p*)^(p-1)."""
    from .spaces import p_star
    ps = p_star(p)
    alpha = p * (1 - 1 / ps) ** (p - 1)
    ax, ay = np.abs(x), np.abs(y)
    return alpha * (ay - (ps - 1) * ax) * (ax + ay) ** (p - 1)


# ---------------------------------------------------------------------------
# export

def export_surface(result: IterationResult, path_csv, path_json=None) -> None:
    g = result.grid
    x = g.axis
    path_csv = Path(path_csv)
    with path_csv.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "U"])
        for i, xi in enumerate(x):
            for j, yj in enumerate(x):
                w.writerow([repr(float(xi)), repr(float(yj)),
                            repr(float(g.values[i, j]))])
    meta = {"p": g.p, "b": g.b, "B": g.B, "beta": g.beta, "L": g.L,
            "M": g.M, "status": result.status.value,
            "iterations": result.iterations}
    path_json = Path(path_json) if path_json else path_csv.with_suffix(".json")
    path_json.write_text(json.dumps(meta, indent=2, sort_keys=True))

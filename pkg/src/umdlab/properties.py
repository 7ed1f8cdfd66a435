"""Instance-level property checks run by the PropertySuite experiment.

Every check takes ``(seed, smoke)`` and returns a list of
:class:`CheckResult`; ``smoke`` shrinks instance counts and sizes.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from . import bellman
from .lpnorm import MultiplierOperator, adjoint, norm_lower_bound
from .martingale import (ADAPTED, LEVEL, CoefficientPlan, MartingaleTree,
                         adjoint_pnorm_check, enumerate_plans,
                         finite_transform_matrix, lifting_gap, optimize_tree,
                         ratio)
from .multipliers import (BanuelosBogdan, BeurlingAhlfors, Counterexample,
                          KappaQuotient, LevyAtom, LogQuotient, PowerQuotient,
                          ShiftedPower, SphereAtom, SphericalPower, compose,
                          lattice_table, pad, plus_constant,
                          sphere_atoms_from_basis)
from .spaces import SCALAR, dual_exponent
from .symbolsets import (CoefficientSet, convex_hull, diameter, hull_subset,
                         minkowski_sum, scale)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    passed: bool
    params: dict


CHECKS: dict[str, Callable] = {}


def check(name):
    def deco(fn):
        CHECKS[name] = fn
        return fn
    return deco


def run_check(name: str, seed: int = 0, smoke: bool = False):
    if name not in CHECKS:
        raise KeyError(f"unknown property check {name!r}; "
                       f"known: {sorted(CHECKS)}")
    return CHECKS[name](seed, smoke)


def _random_set(rng, k, real=False):
    pts = rng.uniform(-2, 2, k)
    if not real:
        pts = pts + 1j * rng.uniform(-2, 2, k)
    return CoefficientSet(pts)


def _random_plan(rng, depth, points, mode):
    pts = np.asarray(points, dtype=complex)
    if mode == LEVEL:
        return CoefficientPlan.level(pts[rng.integers(len(pts), size=depth + 1)])
    per = [pts[rng.integers(len(pts), size=max(1, 2 ** (n - 1)))]
           for n in range(depth + 1)]
    per[0] = per[0][:1]
    return CoefficientPlan.adapted(per)


# ---------------------------------------------------------------------------
# shipped symbol families

def shipped_symbols() -> dict:
    """One representative instance of every family."""
    s = 1 / math.sqrt(2)
    base = PowerQuotient((1.0, -1.0))
    rot = np.array([[s, -s], [s, s]])
    return {
        "PowerQuotient": base,
        "PowerQuotient_alpha1": PowerQuotient((1.0, 0.5j, -0.25), alpha=1.0),
        "SphericalPower": SphericalPower(2, 1.5, (
            SphereAtom((1.0, 0.0), 1.0, 1.0),
            SphereAtom((s, s), 2.0, -1.0),
            SphereAtom((0.0, 1.0), 0.5, 1j))),
        "BanuelosBogdan": BanuelosBogdan(2, (
            LevyAtom((1.0, 0.5), 1.0, -1.0),
            LevyAtom((0.0, 2.0), 0.5, 1.0)),
            sphere_atoms_from_basis([1.0, -1.0])),
        "BeurlingAhlfors": BeurlingAhlfors(),
        "LogQuotient": LogQuotient(2, (
            SphereAtom((1.0, 0.0), 1.0, 1.0),
            SphereAtom((0.0, 1.0), 1.0, -1.0))),
        "ShiftedPower": ShiftedPower(2, 2.0, 1.0),
        "KappaQuotient": KappaQuotient(0.5, 1.5, 1.0, -1.0),
        "Counterexample": Counterexample(2),
        "Composed": compose(base, rot),
        "Padded": pad(base, 3),
        "PlusConstant": plus_constant(base, 0.5j),
    }


# ---------------------------------------------------------------------------
# lp-estimator

@check("p2_exactness")
def _p2_exactness(seed, smoke):
    out = []
    for name, spec in shipped_symbols().items():
        for N in ((16, 32) if smoke else (16, 64)):
            t0 = time.perf_counter()
            tab = lattice_table(spec, N)
            est = norm_lower_bound(MultiplierOperator(tab), 2.0, seed=seed)
            dt = time.perf_counter() - t0
            err = abs(est.value - tab.max_modulus)
            out.append(CheckResult("p2_exactness", err,
                                   err <= 1e-8 and dt < 10.0,
                                   {"symbol": name, "N": N,
                                    "seconds": round(dt, 3)}))
    return out


@check("duality_fft")
def _duality_fft(seed, smoke):
    out = []
    for name in ("PowerQuotient", "BeurlingAhlfors"):
        spec = shipped_symbols()[name]
        op = MultiplierOperator(lattice_table(spec, 16))
        for p in (4.0,) if smoke else (4.0, 1.5):
            a = norm_lower_bound(op, p, restarts=4, seed=seed).value
            b = norm_lower_bound(adjoint(op), dual_exponent(p), restarts=4,
                                 seed=seed).value
            out.append(CheckResult("duality_fft", abs(a - b),
                                   abs(a - b) <= 2e-2,
                                   {"symbol": name, "N": 16, "p": p,
                                    "primal": a, "dual": b}))
    return out


# ---------------------------------------------------------------------------
# martingale-lab

@check("singleton")
def _singleton(seed, smoke):
    out = []
    for a in (1.0, -2.5, 0.3 + 0.4j, 2j):
        for p in (1.5, 4.0):
            est = optimize_tree(CoefficientSet([a]), p, depth=4 if smoke else 6,
                                restarts=2, seed=seed)
            err = abs(est.value - abs(a))
            out.append(CheckResult("singleton", err, err <= 1e-9,
                                   {"a": str(a), "p": p}))
    return out


@check("scaling")
def _scaling(seed, smoke):
    rng = np.random.default_rng(seed)
    worst = 0.0
    n = 100 if smoke else 1000
    for _ in range(n):
        depth = int(rng.integers(1, 6))
        real = bool(rng.integers(2))
        f = MartingaleTree.random(depth, rng=rng, real=real)
        A = _random_set(rng, 3, real=real)
        plan = _random_plan(rng, depth, list(A), (LEVEL, ADAPTED)[rng.integers(2)])
        a = complex(rng.normal(), rng.normal())
        p = float(rng.uniform(1.1, 6.0))
        r = ratio(f, plan, p)
        err = abs(ratio(f, plan.scaled(a), p) - abs(a) * r) / max(abs(a) * r,
                                                                  1e-300)
        worst = max(worst, err)
    return [CheckResult("scaling", worst, worst <= 1e-12,
                        {"instances": n, "measure": "relative"})]


@check("lifting")
def _lifting(seed, smoke):
    rng = np.random.default_rng(seed)
    worst = math.inf
    n = 100 if smoke else 1000
    for _ in range(n):
        depth = int(rng.integers(1, 7))
        f = MartingaleTree.random(depth, rng=rng, real=bool(rng.integers(2)))
        signs = _random_plan(rng, depth, [-1.0, 1.0],
                             (LEVEL, ADAPTED)[rng.integers(2)])
        a1, a2 = (complex(*rng.uniform(-3, 3, 2)) for _ in range(2))
        p = float(rng.uniform(1.1, 6.0))
        worst = min(worst, lifting_gap(f, signs, a1, a2, p))
    return [CheckResult("lifting", worst, worst >= -1e-12,
                        {"instances": n, "measure": "min slack"})]


def _value_grid_tree(rng, depth):
    vals = rng.integers(-2, 3, 2 ** depth).astype(float)
    if not np.any(vals[1:]):
        vals[-1] = 1.0
    return MartingaleTree(SCALAR, vals)


def _all_plan_ratios(f, points, mode, p):
    """Ratios of every plan, evaluated by the same routine."""
    depth = f.depth
    pts = list(points)
    if mode == LEVEL:
        for choice in itertools.product(pts, repeat=depth + 1):
            yield ratio(f, CoefficientPlan.level(choice), p)
    else:
        for choice in itertools.product(pts, repeat=2 ** depth):
            yield ratio(f, CoefficientPlan(ADAPTED, np.array(choice)), p)


@check("adapted_vs_level")
def _adapted_vs_level(seed, smoke):
    rng = np.random.default_rng(seed)
    out = []
    for depth in (1, 2, 3):
        for _ in range(2 if smoke else 5):
            f = _value_grid_tree(rng, depth)
            p = float(rng.choice([1.5, 3.0, 4.0]))
            lv = max(_all_plan_ratios(f, (-1.0, 1.0), LEVEL, p))
            ad = max(_all_plan_ratios(f, (-1.0, 1.0), ADAPTED, p))
            out.append(CheckResult("adapted_vs_level", ad - lv, ad >= lv,
                                   {"depth": depth, "p": p}))
    return out


_HULL_PAIRS = (
    ([-0.5, 0.5, 0.5j], [1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]),
    ([0.0, 1.0], [-1.0, 1.0]),
    ([0.25, 0.75], [0.0, 1.0]),
    ([0.1 + 0.1j, -0.2], [2.0, -2.0 + 1j, -2.0 - 1j]),
)


@check("hull_monotonicity")
def _hull_monotonicity(seed, smoke):
    rng = np.random.default_rng(seed)
    out = []
    for A1, A2 in _HULL_PAIRS:
        assert hull_subset(convex_hull(A1), convex_hull(A2))
        e1 = convex_hull(A1).extreme_points
        e2 = convex_hull(A2).extreme_points
        for depth in (1, 2, 3):
            f = _value_grid_tree(rng, depth)
            p = float(rng.choice([1.5, 3.0]))
            m1 = enumerate_plans(f, e1, LEVEL, p)[1]
            m2 = enumerate_plans(f, e2, LEVEL, p)[1]
            out.append(CheckResult("hull_monotonicity", m2 - m1,
                                   m1 <= m2 * (1 + 1e-12),
                                   {"A1": str(A1), "A2": str(A2),
                                    "depth": depth, "p": p}))
    return out


@check("extreme_point_sufficiency")
def _extreme_points(seed, smoke):
    rng = np.random.default_rng(seed)
    out = []
    A = CoefficientSet([-1.0, 0.5 + 1j, 1.0 - 0.5j])
    ext = convex_hull(A).extreme_points
    # dense grid in the triangle via barycentric coordinates
    k = 8 if smoke else 16
    bary = [(i / k, j / k) for i in range(k + 1) for j in range(k + 1 - i)]
    dense = [w1 * ext[0] + w2 * ext[1] + (1 - w1 - w2) * ext[2]
             for w1, w2 in bary]
    for depth in (1, 2):
        f = MartingaleTree.random(depth, rng=rng, real=False)
        p = 3.0
        me = enumerate_plans(f, ext, LEVEL, p)[1]
        md = enumerate_plans(f, dense, LEVEL, p)[1]
        out.append(CheckResult("extreme_point_sufficiency", abs(md - me),
                               abs(md - me) <= 1e-6, {"depth": depth}))
    return out


@check("minkowski_subadditivity")
def _minkowski(seed, smoke):
    rng = np.random.default_rng(seed)
    worst = math.inf
    for _ in range(50 if smoke else 300):
        depth = int(rng.integers(1, 5))
        f = MartingaleTree.random(depth, rng=rng, real=False)
        A1 = _random_set(rng, 2)
        A2 = _random_set(rng, 2)
        P1 = _random_plan(rng, depth, list(A1), LEVEL)
        P2 = _random_plan(rng, depth, list(A2), LEVEL)
        p = float(rng.uniform(1.2, 5.0))
        s = CoefficientPlan(LEVEL, P1.nodes + P2.nodes)
        assert s.within(minkowski_sum(A1, A2))
        worst = min(worst, ratio(f, P1, p) + ratio(f, P2, p) - ratio(f, s, p))
    return [CheckResult("minkowski_subadditivity", worst, worst >= -1e-12,
                        {"measure": "min slack"})]


@check("p2_closed_form")
def _p2_closed_form(seed, smoke):
    rng = np.random.default_rng(seed)
    out = []
    for k in (1, 2, 3):
        A = _random_set(rng, k)
        est = optimize_tree(A, 2.0, depth=4 if smoke else 6, restarts=2,
                            seed=seed)
        target = max(abs(a) for a in A)
        out.append(CheckResult("p2_closed_form", abs(est.value - target),
                               abs(est.value - target) <= 1e-6,
                               {"A": str(list(A))}))
    return out


@check("duality_matrix")
def _duality_matrix(seed, smoke):
    rng = np.random.default_rng(seed)
    out = []
    for depth in (1, 2, 3):
        for _ in range(1 if smoke else 2):
            plan = _random_plan(rng, depth, [-1.0, 1.0, 0.5j], ADAPTED)
            T = finite_transform_matrix(depth, plan)
            p = float(rng.choice([1.5, 3.0, 4.0]))
            a, b = adjoint_pnorm_check(T, p, restarts=8 if smoke else 32,
                                       seed=seed)
            out.append(CheckResult("duality_matrix", abs(a - b),
                                   abs(a - b) <= 1e-4,
                                   {"depth": depth, "p": p, "primal": a,
                                    "dual": b}))
    return out


# ---------------------------------------------------------------------------
# symbol sets

@check("hull_invariants")
def _hull_invariants(seed, smoke):
    rng = np.random.default_rng(seed)
    ok, n = True, 30 if smoke else 200
    worst_diam = 0.0
    for _ in range(n):
        A = _random_set(rng, int(rng.integers(1, 9)),
                        real=bool(rng.integers(2)))
        H = convex_hull(A)
        ok &= convex_hull(H.extreme_points).vertex_set() == H.vertex_set()
        ok &= all(H.contains(a) for a in A)
        a = complex(rng.normal(), rng.normal())
        worst_diam = max(worst_diam,
                         abs(diameter(scale(A, a)) - abs(a) * diameter(A)))
        B = _random_set(rng, int(rng.integers(1, 6)))
        lhs = convex_hull(minkowski_sum(A, B)).vertex_set()
        rhs = convex_hull([x + y for x in H.extreme_points
                           for y in convex_hull(B).extreme_points]).vertex_set()
        ok &= _same_vertices(lhs, rhs)
    return [CheckResult("hull_invariants", worst_diam,
                        bool(ok) and worst_diam <= 1e-12, {"instances": n})]


def _same_vertices(s1, s2, tol=1e-9):
    if len(s1) != len(s2):
        return False
    return all(min(abs(a - b) for b in s2) <= tol for a in s1)


# ---------------------------------------------------------------------------
# multiplier bank

@check("bb_reduction")
def _bb_reduction(seed, smoke):
    rng = np.random.default_rng(seed)
    out = []
    for d in (2, 3):
        a = rng.uniform(-2, 2, d) + 1j * rng.uniform(-2, 2, d)
        bb = BanuelosBogdan(d, (), sphere_atoms_from_basis(list(a)))
        pq = PowerQuotient(tuple(a), 2.0)
        xi = rng.standard_normal((100 if smoke else 1000, d))
        err = float(np.max(np.abs(bb(xi) - pq(xi))))
        out.append(CheckResult("bb_reduction", err, err <= 1e-12, {"d": d}))
    return out


def kappa_quadrature(xi, u, v, a1, a2) -> complex:
    """Average over alpha ~ U(u, v] of PowerQuotient((a1, a2), alpha)."""
    x1, x2 = abs(xi[0]), abs(xi[1])

    def w2(al):
        return x2 ** al / (x1 ** al + x2 ** al)

    avg, _ = integrate.quad(w2, u, v, epsabs=1e-13, epsrel=1e-12)
    avg /= v - u
    return a1 * (1 - avg) + a2 * avg


@check("kappa_quadrature")
def _kappa_quadrature(seed, smoke):
    rng = np.random.default_rng(seed)
    out = []
    for u, v in ((0.0, 2.0), (0.5, 1.5), (1.0, 2.0)):
        a1, a2 = complex(*rng.normal(size=2)), complex(*rng.normal(size=2))
        spec = KappaQuotient(u, v, a1, a2)
        xi = rng.standard_normal((100, 2)) * np.exp(rng.uniform(-3, 3, (100, 1)))
        got = spec(xi)
        want = np.array([kappa_quadrature(x, u, v, a1, a2) for x in xi])
        err = float(np.max(np.abs(got - want)))
        out.append(CheckResult("kappa_quadrature", err, err <= 1e-6,
                               {"u": u, "v": v}))
    return out


# ---------------------------------------------------------------------------
# bellman engine

@check("bellman_fixed_point")
def _bellman_fixed_point(seed, smoke):
    M = 101 if smoke else 201
    g1 = bellman.BellmanGrid(2.0, -1.0, 1.0, 1.0, L=4.0, M=M)
    r1 = bellman.iterate(g1, max_iter=10, tol=1e-10)
    g2 = bellman.BellmanGrid(2.0, -1.0, 1.0, 0.9, L=4.0, M=M)
    r2 = bellman.iterate(g2, max_iter=50)
    return [
        CheckResult("bellman_fixed_point", r1.sup_change,
                    r1.status == bellman.Status.CONVERGED
                    and r1.iterations == 1 and r1.sup_change < 1e-10,
                    {"beta": 1.0, "M": M, "status": r1.status.value,
                     "iterations": r1.iterations}),
        CheckResult("bellman_fixed_point", float(r2.iterations),
                    r2.status == bellman.Status.DIVERGED
                    and r2.iterations <= 50,
                    {"beta": 0.9, "M": M, "status": r2.status.value,
                     "iterations": r2.iterations}),
    ]

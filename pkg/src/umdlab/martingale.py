"""Paley-Walsh martingale trees, A-martingale transforms and lower bounds
for UMD_p^A constants.

A tree of depth N stores the constant ``f_0`` and, for each level
``n = 1..N``, the values of ``phi_n`` on the ``2**(n-1)`` sign histories.
Histories are indexed in binary order with ``r_1`` as the most significant
bit and ``r = +1`` encoded as bit 0, so the children of history ``h`` at
level ``n`` are ``2h`` (``r_n = +1``) and ``2h + 1`` (``r_n = -1``).

Internally all node values live in one "slot" array of length ``2**N``:
slot 0 is the root and level ``n`` occupies slots ``2**(n-1) .. 2**n - 1``.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .spaces import SCALAR, SpaceSpec, lq_norm, norm_pow_subgradient
from .symbolsets import CoefficientSet, convex_hull

LEVEL = "level"
ADAPTED = "adapted"
MAX_MATRIX_DEPTH = 6


# ---------------------------------------------------------------------------
# slot helpers

def _level_slice(n: int) -> slice:
    return slice(0, 1) if n == 0 else slice(2 ** (n - 1), 2 ** n)


def _slot_levels(depth: int) -> np.ndarray:
    lv = np.zeros(2 ** depth, dtype=int)
    for n in range(1, depth + 1):
        lv[_level_slice(n)] = n
    return lv


def _slot_weights(depth: int) -> np.ndarray:
    # weights turning the slot Euclidean metric into the L^2(leaves) metric
    return 2.0 ** (-np.maximum(_slot_levels(depth) - 1, 0))


def synthesize(slots: np.ndarray, depth: int) -> np.ndarray:
    """Terminal values f_N on all 2**depth leaves from slot values.

    ``slots`` has shape (..., 2**depth, dim); leading axes are batched.
    """
    vals = slots[..., 0:1, :]
    for n in range(1, depth + 1):
        phi = slots[..., _level_slice(n), :]
        vals = np.stack([vals + phi, vals - phi], axis=-2)
        vals = vals.reshape(vals.shape[:-3] + (2 ** n, vals.shape[-1]))
    return vals


def aggregate(leaf_grad: np.ndarray, depth: int) -> np.ndarray:
    """Adjoint of :func:`synthesize` for the plain sum pairing."""
    out = np.empty_like(leaf_grad)
    s = leaf_grad
    for n in range(depth, 0, -1):
        pairs = s.reshape(s.shape[:-2] + (2 ** (n - 1), 2, s.shape[-1]))
        out[..., _level_slice(n), :] = pairs[..., 0, :] - pairs[..., 1, :]
        s = pairs.sum(axis=-2)
    out[..., 0:1, :] = s
    return out


def _as_node_array(values, count: int, dim: int) -> np.ndarray:
    arr = np.array(values, dtype=complex)
    if arr.ndim == 1 and dim == 1 and arr.shape[0] == count:
        arr = arr[:, None]
    arr = arr.reshape(count, dim)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tree values must be finite")
    return arr


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class MartingaleTree:
    """Complete binary Paley-Walsh martingale of finite depth."""

    space: SpaceSpec
    slots: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.slots, dtype=complex)
        if arr.ndim == 1:
            arr = arr[:, None]
        n = arr.shape[0]
        if n < 1 or n & (n - 1):
            raise ValueError("slot count must be a power of two")
        if arr.shape[1] != self.space.dim:
            raise ValueError("tree values do not match the space dimension")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tree values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "slots", arr)

    @classmethod
    def from_levels(cls, root, levels: Sequence, space: SpaceSpec = SCALAR):
        parts = [_as_node_array(root, 1, space.dim)]
        for n, lv in enumerate(levels, start=1):
            parts.append(_as_node_array(lv, 2 ** (n - 1), space.dim))
        return cls(space, np.concatenate(parts, axis=0))

    @classmethod
    def random(cls, depth: int, space: SpaceSpec = SCALAR, rng=None,
               real: bool = True) -> "MartingaleTree":
        rng = np.random.default_rng(rng)
        shape = (2 ** depth, space.dim)
        vals = rng.uniform(-1.0, 1.0, shape).astype(complex)
        if not real:
            vals = vals + 1j * rng.uniform(-1.0, 1.0, shape)
        return cls(space, vals)

    @property
    def depth(self) -> int:
        return int(round(math.log2(self.slots.shape[0])))

    @property
    def root(self) -> np.ndarray:
        return self.slots[0]

    def level(self, n: int) -> np.ndarray:
        if not 1 <= n <= self.depth:
            raise IndexError(f"level {n} outside 1..{self.depth}")
        return self.slots[_level_slice(n)]

    def leaves(self) -> np.ndarray:
        return synthesize(self.slots, self.depth)

    def is_zero(self) -> bool:
        return not np.any(self.slots)

    def zero_pad(self, depth: int) -> "MartingaleTree":
        """Same martingale viewed at a larger depth (phi_n = 0 beyond)."""
        if depth < self.depth:
            raise ValueError("cannot pad to a smaller depth")
        out = np.zeros((2 ** depth, self.space.dim), dtype=complex)
        out[: self.slots.shape[0]] = self.slots
        return MartingaleTree(self.space, out)

    def scaled(self, a) -> "MartingaleTree":
        return MartingaleTree(self.space, complex(a) * self.slots)

    def to_json(self) -> dict:
        return {
            "space": self.space.to_json(),
            "depth": self.depth,
            "root": _pairs(self.root),
            "levels": [_pairs(self.level(n)) for n in range(1, self.depth + 1)],
        }

    @classmethod
    def from_json(cls, obj) -> "MartingaleTree":
        space = SpaceSpec.from_json(obj["space"])
        root = _unpairs(obj["root"])
        levels = [_unpairs(lv) for lv in obj["levels"]]
        return cls.from_levels(root, levels, space)


def _pairs(arr) -> list:
    a = np.asarray(arr)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _unpairs(obj) -> np.ndarray:
    a = np.asarray(obj, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


@dataclass(frozen=True)
class CoefficientPlan:
    """Transform coefficients, stored per node in slot order.

    In ``level`` mode every node of a level carries the same coefficient
    (a deterministic sequence); in ``adapted`` mode each node has its own.
    """

    mode: str
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.mode not in (LEVEL, ADAPTED):
            raise ValueError(f"unknown plan mode {self.mode!r}")
        arr = np.array(self.nodes, dtype=complex).reshape(-1)
        n = arr.shape[0]
        if n < 1 or n & (n - 1):
            raise ValueError("plan size must be a power of two")
        if self.mode == LEVEL:
            depth = int(round(math.log2(n)))
            for k in range(1, depth + 1):
                seg = arr[_level_slice(k)]
                if np.any(seg != seg[0]):
                    raise ValueError("level plan must be constant per level")
        arr.setflags(write=False)
        object.__setattr__(self, "nodes", arr)

    @classmethod
    def level(cls, eps: Sequence) -> "CoefficientPlan":
        eps = [complex(e) for e in eps]
        depth = len(eps) - 1
        nodes = np.empty(2 ** depth, dtype=complex)
        for n, e in enumerate(eps):
            nodes[_level_slice(n)] = e
        return cls(LEVEL, nodes)

    @classmethod
    def adapted(cls, per_level: Sequence) -> "CoefficientPlan":
        parts = [np.asarray(v, dtype=complex).reshape(-1) for v in per_level]
        for n, v in enumerate(parts):
            if v.shape[0] != (1 if n == 0 else 2 ** (n - 1)):
                raise ValueError(f"level {n} needs {max(1, 2 ** (n - 1))} "
                                 f"coefficients, got {v.shape[0]}")
        return cls(ADAPTED, np.concatenate(parts))

    @classmethod
    def constant(cls, a, depth: int, mode: str = LEVEL) -> "CoefficientPlan":
        return cls(mode, np.full(2 ** depth, complex(a)))

    @property
    def depth(self) -> int:
        return int(round(math.log2(self.nodes.shape[0])))

    def level_values(self) -> list[complex]:
        if self.mode != LEVEL:
            raise ValueError("adapted plans have no level sequence")
        return [complex(self.nodes[_level_slice(n)][0])
                for n in range(self.depth + 1)]

    def scaled(self, a) -> "CoefficientPlan":
        return CoefficientPlan(self.mode, complex(a) * self.nodes)

    def as_adapted(self) -> "CoefficientPlan":
        return CoefficientPlan(ADAPTED, self.nodes)

    def extended(self, depth: int, fill=1.0) -> "CoefficientPlan":
        if depth < self.depth:
            raise ValueError("cannot extend to a smaller depth")
        nodes = np.full(2 ** depth, complex(fill))
        nodes[: self.nodes.shape[0]] = self.nodes
        return CoefficientPlan(self.mode, nodes)

    def within(self, A) -> bool:
        hull = convex_hull(A)
        return all(hull.contains(complex(c)) for c in self.nodes)

    def to_json(self) -> dict:
        if self.mode == LEVEL:
            vals = self.level_values()
            return {"mode": LEVEL, "coefficients": _pairs(np.array(vals))}
        per_level = [self.nodes[_level_slice(n)] for n in range(self.depth + 1)]
        return {"mode": ADAPTED, "coefficients": [_pairs(v) for v in per_level]}

    @classmethod
    def from_json(cls, obj) -> "CoefficientPlan":
        if obj["mode"] == LEVEL:
            return cls.level(_unpairs(obj["coefficients"]))
        return cls.adapted([_unpairs(v) for v in obj["coefficients"]])


# ---------------------------------------------------------------------------
# basic operations

def terminal_pnorm(f: MartingaleTree, p: float) -> float:
    """(E ||f_N||^p)^(1/p) under the uniform measure on sign paths."""
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    nr = lq_norm(f.leaves(), f.space.exponent)
    return _pmean(nr, p)


def _pmean(nr: np.ndarray, p: float) -> float:
    m = float(nr.max(initial=0.0))
    if m == 0.0:
        return 0.0
    return m * float(np.mean((nr / m) ** p)) ** (1.0 / p)


def apply_transform(f: MartingaleTree, plan: CoefficientPlan) -> MartingaleTree:
    """g_0 = a_0 f_0 and dg_n = a_n df_n node by node."""
    if plan.depth != f.depth:
        raise ValueError(f"plan depth {plan.depth} != tree depth {f.depth}")
    return MartingaleTree(f.space, plan.nodes[:, None] * f.slots)


def ratio(f: MartingaleTree, plan: CoefficientPlan, p: float) -> float:
    den = terminal_pnorm(f, p)
    if den == 0.0:
        raise ZeroDivisionError("ratio undefined for the zero martingale")
    return terminal_pnorm(apply_transform(f, plan), p) / den


# ---------------------------------------------------------------------------
# coefficient optimisation

def _slot_groups(depth: int, mode: str) -> list[np.ndarray]:
    if mode == LEVEL:
        return [np.arange(2 ** depth)[_level_slice(n)] for n in range(depth + 1)]
    return [np.array([s]) for s in range(2 ** depth)]


def _group_contributions(f: MartingaleTree, groups) -> np.ndarray:
    """Leaf contribution of each coefficient group: (groups, leaves, dim)."""
    depth = f.depth
    out = np.empty((len(groups), 2 ** depth, f.space.dim), dtype=complex)
    for i, g in enumerate(groups):
        s = np.zeros_like(f.slots)
        s[g] = f.slots[g]
        out[i] = synthesize(s, depth)
    return out


def _pobjective(leaf_vals: np.ndarray, q: float, p: float) -> np.ndarray:
    return np.mean(lq_norm(leaf_vals, q) ** p, axis=-1)


def _plan_from_choice(values: np.ndarray, groups, depth: int,
                      mode: str) -> CoefficientPlan:
    nodes = np.empty(2 ** depth, dtype=complex)
    for v, g in zip(values, groups):
        nodes[g] = v
    return CoefficientPlan(mode, nodes)


def enumerate_plans(f: MartingaleTree, points: Sequence[complex], mode: str,
                    p: float, chunk: int = 4096):
    """Exhaustive argmax over all plans with coefficients in ``points``.

    Returns ``(plan, ratio)``; ties resolve to the first plan in
    lexicographic order of point indices.
    """
    pts = np.asarray(list(points), dtype=complex)
    groups = _slot_groups(f.depth, mode)
    K = _group_contributions(f, groups)
    den = terminal_pnorm(f, p)
    if den == 0.0:
        raise ZeroDivisionError("ratio undefined for the zero martingale")
    q = f.space.exponent
    best_val, best_idx = -1.0, None
    combos = itertools.product(range(len(pts)), repeat=len(groups))
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
        if block.size == 0:
            break
        C = pts[block]
        leaves = np.einsum("bs,sld->bld", C, K)
        obj = _pobjective(leaves, q, p)
        i = int(np.argmax(obj))
        if obj[i] > best_val:
            best_val, best_idx = float(obj[i]), block[i]
    plan = _plan_from_choice(pts[best_idx], groups, f.depth, mode)
    return plan, best_val ** (1.0 / p) / den


def optimize_coefficients(f: MartingaleTree, A, mode: str = LEVEL,
                          p: float = 2.0, budget: int = 4096, rng=None,
                          start: Optional[CoefficientPlan] = None
                          ) -> CoefficientPlan:
    """Best plan with coefficients in Ext(Conv(A)) for a fixed tree.

    Exhaustive when the plan count fits in ``budget``; otherwise cyclic
    coordinate ascent (root first, then level by level in history order)
    from ``start`` or a seeded random plan.
    """
    if f.is_zero():
        raise ZeroDivisionError("cannot optimise coefficients for f = 0")
    ext = list(convex_hull(A).extreme_points)
    groups = _slot_groups(f.depth, mode)
    if len(ext) ** len(groups) <= budget:
        return enumerate_plans(f, ext, mode, p)[0]

    pts = np.asarray(ext, dtype=complex)
    K = _group_contributions(f, groups)
    q = f.space.exponent
    if start is not None:
        if start.depth != f.depth:
            raise ValueError("start plan depth mismatch")
        coef = np.array([start.nodes[g[0]] for g in groups])
        # snap foreign coefficients onto the nearest extreme point
        coef = pts[np.argmin(np.abs(coef[:, None] - pts[None, :]), axis=1)]
    else:
        coef = pts[np.random.default_rng(rng).integers(len(pts),
                                                       size=len(groups))]
    G = np.einsum("s,sld->ld", coef, K)
    cur = float(_pobjective(G, q, p))
    improved = True
    while improved:
        improved = False
        for s in range(len(groups)):
            trial = G[None] + (pts - coef[s])[:, None, None] * K[s][None]
            obj = _pobjective(trial, q, p)
            j = int(np.argmax(obj))
            if obj[j] > cur * (1 + 1e-14) and pts[j] != coef[s]:
                cur = float(obj[j])
                G = trial[j]
                coef[s] = pts[j]
                improved = True
    return _plan_from_choice(coef, groups, f.depth, mode)


# ---------------------------------------------------------------------------
# tree optimisation

@dataclass(frozen=True)
class BetaEstimate:
    value: float
    witness_tree: MartingaleTree
    witness_plan: CoefficientPlan
    p: float
    restarts_used: int
    seed: int
    history: tuple = ()

    @property
    def depth(self) -> int:
        return self.witness_tree.depth

    def recompute(self) -> float:
        return ratio(self.witness_tree, self.witness_plan, self.p)

    def to_json(self) -> dict:
        doc = self.witness_tree.to_json()
        doc.update({
            "p": self.p,
            "plan": self.witness_plan.to_json(),
            "ratio": self.value,
            "restarts_used": self.restarts_used,
            "seed": self.seed,
        })
        return doc

    @classmethod
    def from_json(cls, obj) -> "BetaEstimate":
        tree = MartingaleTree.from_json(obj)
        plan = CoefficientPlan.from_json(obj["plan"])
        return cls(float(obj["ratio"]), tree, plan, float(obj["p"]),
                   int(obj.get("restarts_used", 0)), int(obj.get("seed", 0)))


def analysis(leaves: np.ndarray, depth: int) -> np.ndarray:
    """Inverse of :func:`synthesize`: slot values from terminal values."""
    return aggregate(leaves, depth) / (2.0 ** depth * _slot_weights(depth))[
        :, None]


def _ascend_tree(slots: np.ndarray, nodes: np.ndarray, depth: int, q: float,
                 p: float, max_steps: int, real: bool):
    """Maximise ||T f||_p / ||f||_p over trees for a fixed plan.

    For fixed coefficients T is linear on terminal values, so the
    safeguarded nonlinear power method applies verbatim.
    """
    from .lpnorm import power_iterate
    c = nodes[:, None]
    cc = np.conj(nodes)[:, None]
    scale = (2.0 ** depth * _slot_weights(depth))[:, None]

    def fwd(u):
        return synthesize(c * analysis(u, depth), depth)

    def bwd(v):
        return synthesize(cc * aggregate(v, depth) / scale, depth)

    res = power_iterate(fwd, bwd, synthesize(slots, depth), p, q,
                        max_iter=max_steps, tol=1e-12, real=real)
    return analysis(res.witness, depth), res.value


def _single_run(A, p, depth, space, mode, budget, rng, start, real,
                max_outer, inner_steps, tol):
    q = space.exponent
    if start is None:
        tree = MartingaleTree.random(depth, space, rng, real=real)
    else:
        tree = start
    slots = np.array(tree.slots)
    plan = optimize_coefficients(MartingaleTree(space, slots), A, mode, p,
                                 budget, rng=rng)
    val = ratio(MartingaleTree(space, slots), plan, p)
    trace = [val]
    for _ in range(max_outer):
        slots, _ = _ascend_tree(slots, plan.nodes, depth, q, p, inner_steps,
                                real)
        tree = MartingaleTree(space, slots)
        new_plan = optimize_coefficients(tree, A, mode, p, budget, rng=rng,
                                         start=plan)
        new_val = ratio(tree, new_plan, p)
        if new_val < ratio(tree, plan, p):
            new_plan = plan
            new_val = ratio(tree, plan, p)
        plan = new_plan
        gain = new_val - val
        val = max(val, new_val)
        trace.append(val)
        if gain <= tol * abs(val):
            break
    tree = MartingaleTree(space, slots)
    return ratio(tree, plan, p), tree, plan, tuple(trace)


def optimize_tree(A, p: float, depth: int = 8, space: SpaceSpec = SCALAR,
                  restarts: int = 16, seed: int = 0, mode: str = LEVEL,
                  budget: int = 4096, warm_start=None,
                  max_outer: int = 40, inner_steps: int = 200,
                  tol: float = 1e-8, threads: int = 1) -> BetaEstimate:
    """Lower bound for beta_{p,X}^A by alternating maximisation.

    Each restart alternates (a) gradient ascent on the tree for a fixed
    plan and (b) re-optimisation of the plan for the fixed tree.  The
    returned value is an achieved ratio, hence a valid lower bound.
    A warm start (e.g. a zero-padded shallower witness) is run first, in
    addition to the random restarts.
    """
    if depth < 1 or restarts < 1:
        raise ValueError("depth and restarts must be at least 1")
    if not isinstance(A, CoefficientSet):
        A = CoefficientSet(A)
    real = A.is_real
    seqs = np.random.SeedSequence(seed).spawn(restarts)
    jobs = [(np.random.default_rng(s), None) for s in seqs]
    if isinstance(warm_start, BetaEstimate):
        warm_start = warm_start.witness_tree
    if warm_start is not None:
        if warm_start.depth < depth:
            warm_start = warm_start.zero_pad(depth)
        if warm_start.depth != depth or warm_start.space != space:
            raise ValueError("warm start does not match depth/space")
        jobs.insert(0, (np.random.default_rng(seed), warm_start))

    def run(job):
        rng, start = job
        return _single_run(A, p, depth, space, mode, budget, rng, start,
                           real, max_outer, inner_steps, tol)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    best = max(range(len(results)), key=lambda i: results[i][0])
    val, tree, plan, trace = results[best]
    return BetaEstimate(val, tree, plan, p, len(jobs), seed, trace)


# ---------------------------------------------------------------------------
# lifting and the finite transform matrix

def lift_witness(f: MartingaleTree, sign_plan: CoefficientPlan, a1, a2):
    """Plans (a1+a2)/2 +- (a1-a2)/2 * eps over {a1, a2}."""
    eps = sign_plan.nodes
    if not np.all(np.isin(eps, (-1.0, 1.0))):
        raise ValueError("sign plan coefficients must be +-1")
    if sign_plan.depth != f.depth:
        raise ValueError("sign plan depth mismatch")
    a1, a2 = complex(a1), complex(a2)
    mid, half = (a1 + a2) / 2, (a1 - a2) / 2
    return (CoefficientPlan(sign_plan.mode, mid + half * eps),
            CoefficientPlan(sign_plan.mode, mid - half * eps))


def lifting_gap(f: MartingaleTree, sign_plan: CoefficientPlan, a1, a2,
                p: float) -> float:
    """max lifted norm - |a1 - a2|/2 * ||T_sign f||_p  (never negative)."""
    plus, minus = lift_witness(f, sign_plan, a1, a2)
    lhs = abs(complex(a1) - complex(a2)) / 2 * terminal_pnorm(
        apply_transform(f, sign_plan), p)
    rhs = max(terminal_pnorm(apply_transform(f, plus), p),
              terminal_pnorm(apply_transform(f, minus), p))
    return rhs - lhs


def haar_matrix(depth: int) -> np.ndarray:
    """Leaves-from-slots synthesis matrix for scalar trees."""
    eye = np.eye(2 ** depth, dtype=complex)[:, :, None]
    return synthesize(eye, depth)[:, :, 0].T


def finite_transform_matrix(depth: int, plan: CoefficientPlan) -> np.ndarray:
    """Matrix of f_N -> (T_plan f)_N on the 2**depth leaf values."""
    if depth > MAX_MATRIX_DEPTH:
        raise ValueError(f"depth {depth} exceeds {MAX_MATRIX_DEPTH}")
    if plan.depth != depth:
        raise ValueError("plan depth mismatch")
    H = haar_matrix(depth)
    return H @ np.diag(plan.nodes) @ np.linalg.inv(H)


def adjoint_pnorm_check(T: np.ndarray, p: float, restarts: int = 32,
                        seed: int = 0):
    """Return (||T||_{p->p}, ||T*||_{p'->p'}) from the power method.

    Uniform-measure norms on both sides cancel, so the plain conjugate
    transpose is the adjoint.
    """
    from .lpnorm import matrix_norm_lower_bound
    from .spaces import dual_exponent
    a = matrix_norm_lower_bound(T, p, restarts=restarts, seed=seed)
    b = matrix_norm_lower_bound(T.conj().T, dual_exponent(p),
                                restarts=restarts, seed=seed)
    return a.value, b.value

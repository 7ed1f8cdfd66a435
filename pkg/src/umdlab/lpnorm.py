"""Multipliers on X-valued torus grids and lower bounds for their
L^p -> L^p norms by a safeguarded nonlinear power method.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .multipliers import (LatticeTable, frequency_axis, load_complex_array,
                          save_complex_array)
from .spaces import SCALAR, SpaceSpec, dual_exponent, lq_norm, \
    norm_pow_subgradient

MAX_ITER = 500
REL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GridField:
    """Samples of an X-valued function on the uniform N^d torus grid.

    ``samples`` has shape ``(N,)*d + (dim,)``.
    """

    d: int
    N: int
    space: SpaceSpec
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=complex)
        if arr.shape == (self.N,) * self.d and self.space.dim == 1:
            arr = arr[..., None]
        if arr.shape != (self.N,) * self.d + (self.space.dim,):
            raise ValueError(f"field shape {arr.shape} does not match "
                             f"d={self.d}, N={self.N}, dim={self.space.dim}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @classmethod
    def from_function(cls, fn: Callable, N: int, d: int,
                      space: SpaceSpec = SCALAR) -> "GridField":
        """Sample ``fn(theta)`` with theta of shape (..., d) in [0, 2pi)^d."""
        ax = 2 * np.pi * np.arange(N) / N
        theta = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
        return cls(d, N, space, fn(theta))

    def with_samples(self, arr) -> "GridField":
        return GridField(self.d, self.N, self.space, arr)

    def __add__(self, other):
        return self.with_samples(self.samples + other.samples)

    def __mul__(self, a):
        return self.with_samples(complex(a) * self.samples)

    __rmul__ = __mul__

    def header(self) -> dict:
        return {"d": self.d, "N": self.N, "space": self.space.to_json(),
                "tag": "GridField"}

    def save(self, path) -> None:
        save_complex_array(path, self.samples, self.header())

    @classmethod
    def load(cls, path) -> "GridField":
        header, arr = load_complex_array(path)
        return cls(int(header["d"]), int(header["N"]),
                   SpaceSpec.from_json(header["space"]), arr)


@dataclass(frozen=True, eq=False)
class MultiplierOperator:
    table: LatticeTable
    space: SpaceSpec = SCALAR

    @property
    def N(self) -> int:
        return self.table.N

    @property
    def d(self) -> int:
        return self.table.d

    def __call__(self, f: GridField) -> GridField:
        return apply(self, f)


def _apply_array(table: LatticeTable, arr: np.ndarray) -> np.ndarray:
    axes = tuple(range(table.d))
    spec = np.fft.fftn(arr, axes=axes)
    spec *= table.fft_values[..., None]
    return np.fft.ifftn(spec, axes=axes)


def apply(op: MultiplierOperator, f: GridField) -> GridField:
    """Per coordinate: forward DFT, multiply mode k by m(k), inverse DFT."""
    if f.N != op.N or f.d != op.d:
        raise ValueError(f"field grid {f.d}x{f.N} does not match operator "
                         f"grid {op.d}x{op.N}")
    return f.with_samples(_apply_array(op.table, f.samples))


def adjoint(op: MultiplierOperator) -> MultiplierOperator:
    """Adjoint for the sesquilinear uniform-grid pairing: conj(m(k))."""
    t = op.table
    tab = LatticeTable(t.d, t.N, np.conj(t.values), np.conj(t.zero_mode),
                       t.tag + "*" if t.tag else "")
    return MultiplierOperator(tab, op.space)


def grid_pairing(f: GridField, g: GridField) -> complex:
    """mean over the grid of sum_j f_j conj(g_j)."""
    return complex(np.vdot(g.samples, f.samples)) / f.N ** f.d


def _lp(arr: np.ndarray, q: float, p: float) -> float:
    nr = lq_norm(arr, q).reshape(-1)
    m = float(nr.max(initial=0.0))
    if m == 0.0:
        return 0.0
    return m * float(np.mean((nr / m) ** p)) ** (1.0 / p)


def grid_lp_norm(f: GridField, p: float) -> float:
    """(N^-d sum ||f(x)||^p)^(1/p)."""
    if p < 1:
        raise ValueError("p must be at least 1")
    return _lp(f.samples, f.space.exponent, p)


# ---------------------------------------------------------------------------
# the nonlinear power method

@dataclass(frozen=True)
class PowerResult:
    value: float
    witness: np.ndarray
    trace: tuple


def power_iterate(forward: Callable, backward: Callable, u0: np.ndarray,
                  p: float, q: float = 2.0, max_iter: int = MAX_ITER,
                  tol: float = REL_TOL, real: bool = False) -> PowerResult:
    """Maximise ||T u||_p / ||u||_p from ``u0``.

    ``forward`` applies T and ``backward`` its adjoint for the sum pairing;
    arrays carry the vector coordinate on the last axis.  A proposed
    iterate is accepted only if the ratio does not decrease; otherwise the
    step is halved toward the previous iterate.
    """
    pd, qd = dual_exponent(p), dual_exponent(q)

    def ratio_of(u):
        nu = _lp(u, q, p)
        return (_lp(forward(u), q, p) / nu) if nu > 0 else 0.0

    u = np.asarray(u0, dtype=complex)
    u = u / _lp(u, q, p)
    val = ratio_of(u)
    trace = [val]
    for _ in range(max_iter):
        z = backward(norm_pow_subgradient(forward(u), q, p))
        if real:
            z = z.real.astype(complex)
        new = norm_pow_subgradient(z, qd, pd)
        nn = _lp(new, q, p)
        if nn == 0.0 or not np.all(np.isfinite(new)):
            break
        new = new / nn
        new_val = ratio_of(new)
        t = 1.0
        while new_val < val and t > 1e-6:
            t *= 0.5
            cand = u + t * (new - u)
            nc = _lp(cand, q, p)
            if nc == 0.0:
                continue
            new, new_val = cand / nc, ratio_of(cand)
        if new_val < val:
            break
        gain = new_val - val
        u, val = new, new_val
        trace.append(val)
        if gain <= tol * val:
            break
    return PowerResult(val, u, tuple(trace))


@dataclass(frozen=True)
class NormEstimate:
    value: float
    witness: GridField
    trace: tuple
    restarts_used: int
    seed: int

    def recompute(self, op: MultiplierOperator, p: float) -> float:
        return grid_lp_norm(apply(op, self.witness), p) / grid_lp_norm(
            self.witness, p)


def _extremal_starts(op: MultiplierOperator, real: bool):
    t = op.table
    idx = np.unravel_index(int(np.argmax(np.abs(t.values))), t.values.shape)
    k = frequency_axis(t.N)[list(idx)]
    ax = 2 * np.pi * np.arange(t.N) / t.N
    theta = np.stack(np.meshgrid(*([ax] * t.d), indexing="ij"), axis=-1)
    phase = theta @ k.astype(float)
    e1 = np.zeros(op.space.dim)
    e1[0] = 1.0
    mode = (np.cos(phase) if real else np.exp(1j * phase))[..., None] * e1
    sign = np.where(np.cos(phase) >= 0, 1.0, -1.0)[..., None] * e1
    if not np.any(k):
        sign = np.ones_like(sign)
    return [mode, sign]


def norm_lower_bound(op: MultiplierOperator, p: float, restarts: int = 8,
                     max_iter: int = MAX_ITER, seed: int = 0,
                     warm_start: Optional[GridField] = None,
                     threads: int = 1, tol: float = REL_TOL) -> NormEstimate:
    """Best achieved ratio ||T u||_p / ||u||_p over several starts.

    Starts: the warm start (if any) and a slightly perturbed copy of it,
    the pure mode at the largest |m(k)|, a sign pattern along the same
    direction, and ``restarts`` seeded white-noise fields.  Real fields
    are used when the table is real.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    t = op.table
    shape = (t.N,) * t.d + (op.space.dim,)
    real = t.is_real
    rng = np.random.default_rng(seed)
    starts = []
    if warm_start is not None:
        if warm_start.N != t.N or warm_start.d != t.d:
            raise ValueError("warm start grid does not match the operator")
        w = np.array(warm_start.samples)
        starts.append(w)
        scale = float(np.max(np.abs(w))) or 1.0
        starts.append(w + 1e-3 * scale * rng.standard_normal(shape))
    starts.extend(_extremal_starts(op, real))
    for _ in range(restarts):
        noise = rng.standard_normal(shape)
        if not real:
            noise = noise + 1j * rng.standard_normal(shape)
        starts.append(noise)

    fwd = lambda u: _apply_array(t, u)
    tab_adj = adjoint(op).table
    bwd = lambda u: _apply_array(tab_adj, u)
    q = op.space.exponent

    def run(u0):
        return power_iterate(fwd, bwd, u0, p, q, max_iter, tol, real)

    # at p = 2 the largest |m(k)| is the exact norm; stop once it is hit
    ceiling = t.max_modulus * (1 - 1e-12) if p == 2 else math.inf
    results = []
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, starts))
    else:
        for u0 in starts:
            results.append(run(u0))
            if results[-1].value >= ceiling:
                break
    best = max(range(len(results)), key=lambda i: results[i].value)
    r = results[best]
    witness = GridField(t.d, t.N, op.space, r.witness)
    return NormEstimate(r.value, witness, r.trace, len(results), seed)


def matrix_norm_lower_bound(T: np.ndarray, p: float, restarts: int = 32,
                            seed: int = 0, max_iter: int = 2000,
                            tol: float = 1e-13) -> PowerResult:
    """||T||_{p->p} for a square matrix (counting or uniform measure)."""
    T = np.asarray(T, dtype=complex)
    n = T.shape[1]
    real = bool(np.all(T.imag == 0))
    rng = np.random.default_rng(seed)
    starts = [row for row in np.eye(n)]
    for _ in range(restarts):
        x = rng.standard_normal(n)
        if not real:
            x = x + 1j * rng.standard_normal(n)
        starts.append(x)
    fwd = lambda u: (T @ u[:, 0])[:, None]
    bwd = lambda u: (T.conj().T @ u[:, 0])[:, None]
    best = None
    for x in starts:
        r = power_iterate(fwd, bwd, x[:, None], p, 2.0, max_iter, tol, real)
        if best is None or r.value > best.value:
            best = r
    return PowerResult(best.value, best.witness[:, 0], best.trace)


# ---------------------------------------------------------------------------
# witness transport between grids

def tile_resolution(f: GridField, factor: int = 2) -> GridField:
    """u(theta) -> u(factor * theta) on the finer grid (periodic tiling).

    Modes move from k to factor * k, so homogeneous symbols act on the
    lifted field exactly as on the original, and grid L^p norms agree.
    """
    arr = np.tile(f.samples, (factor,) * f.d + (1,))
    return GridField(f.d, f.N * factor, f.space, arr)


def extend_dimension(f: GridField) -> GridField:
    """Field on T^(d+1) that is constant in the new last variable."""
    arr = np.repeat(f.samples[..., None, :], f.N, axis=-2)
    return GridField(f.d + 1, f.N, f.space, arr)


def resolution_sweep(make_op: Callable[[int], MultiplierOperator], p: float,
                     resolutions, restarts: int = 8, seed: int = 0,
                     max_iter: int = MAX_ITER, threads: int = 1):
    """Estimates over increasing resolutions with tiled warm starts.

    Each resolution must be a multiple of the previous one.
    """
    out = []
    prev = None
    for N in resolutions:
        warm = None
        if prev is not None:
            if N % prev.witness.N:
                raise ValueError("resolutions must be successive multiples")
            warm = tile_resolution(prev.witness, N // prev.witness.N)
        est = norm_lower_bound(make_op(N), p, restarts, max_iter, seed,
                               warm_start=warm, threads=threads)
        out.append(est)
        prev = est
    return out

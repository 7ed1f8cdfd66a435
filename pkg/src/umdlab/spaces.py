"""Finite-dimensional complex l^q spaces.

Vectors are stored as complex numpy arrays whose *last* axis indexes
coordinates, so every function here also works on stacks of vectors
(martingale leaves, grid fields).  Gradients of real functions of a
complex vector are returned in the convention ``g = d/d(re) + i d/d(im)``,
so the directional derivative along ``h`` is ``Re sum(conj(g) * h)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INF = math.inf


def dual_exponent(q: float) -> float:
    """Conjugate exponent q' with 1/q + 1/q' = 1 (1 <-> inf)."""
    q = float(q)
    if q < 1:
        raise ValueError(f"exponent must be >= 1, got {q}")
    if q == 1:
        return INF
    if math.isinf(q):
        return 1.0
    return q / (q - 1.0)


def p_star(p: float) -> float:
    return max(p, p / (p - 1.0))


@dataclass(frozen=True)
class SpaceSpec:
    """The space l^q_n over the complex field."""

    dim: int = 1
    exponent: float = 2.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.exponent >= 1:
            raise ValueError(f"exponent must be >= 1, got {self.exponent}")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "exponent", float(self.exponent))

    @property
    def dual(self) -> "SpaceSpec":
        return SpaceSpec(self.dim, dual_exponent(self.exponent))

    def norm(self, v) -> np.ndarray:
        return lq_norm(v, self.exponent)

    def norm_pow_subgradient(self, v, p: float) -> np.ndarray:
        return norm_pow_subgradient(v, self.exponent, p)

    def to_json(self) -> dict:
        q = "inf" if math.isinf(self.exponent) else self.exponent
        return {"dim": self.dim, "exponent": q}

    @classmethod
    def from_json(cls, obj) -> "SpaceSpec":
        if obj is None:
            return cls()
        q = obj.get("exponent", 2.0)
        q = INF if q in ("inf", "Infinity", None) else float(q)
        return cls(int(obj.get("dim", 1)), q)


SCALAR = SpaceSpec(1, 2.0)


@dataclass(frozen=True)
class Vec:
    """An element of a SpaceSpec; entries are copied and frozen."""

    space: SpaceSpec
    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex).reshape(-1)
        if arr.shape[0] != self.space.dim:
            raise ValueError(
                f"expected {self.space.dim} entries, got {arr.shape[0]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("vector entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    def norm(self) -> float:
        return float(lq_norm(self.entries, self.space.exponent))

    def subgradient(self, p: float) -> "Vec":
        return Vec(self.space,
                   norm_pow_subgradient(self.entries, self.space.exponent, p))

    def __add__(self, other: "Vec") -> "Vec":
        _check_same(self, other)
        return Vec(self.space, self.entries + other.entries)

    def __sub__(self, other: "Vec") -> "Vec":
        _check_same(self, other)
        return Vec(self.space, self.entries - other.entries)

    def __mul__(self, a) -> "Vec":
        return Vec(self.space, complex(a) * self.entries)

    __rmul__ = __mul__


def _check_same(u: Vec, v: Vec) -> None:
    if u.space != v.space:
        raise ValueError(f"space mismatch: {u.space} vs {v.space}")


def lq_norm(v, q: float) -> np.ndarray:
    """l^q norm along the last axis (moduli taken per coordinate)."""
    a = np.abs(np.asarray(v))
    if math.isinf(q):
        return a.max(axis=-1)
    if q == 1:
        return a.sum(axis=-1)
    if q == 2:
        return np.sqrt((a * a).sum(axis=-1))
    # scale by the max modulus to avoid overflow for large q
    m = a.max(axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    return (safe[..., 0]
            * ((a / safe) ** q).sum(axis=-1) ** (1.0 / q))


def _phase(v: np.ndarray) -> np.ndarray:
    a = np.abs(v)
    out = np.zeros_like(v, dtype=complex)
    nz = a > 0
    out[nz] = v[nz] / a[nz]
    return out


def norm_pow_subgradient(v, q: float, p: float) -> np.ndarray:
    """Subgradient of ``w -> ||w||_q^p`` at ``v`` (last axis = coordinates).

    For q = inf the subgradient sits on the lowest index attaining the
    maximal modulus.  Zero vectors get the zero subgradient.
    """
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")
    v = np.asarray(v, dtype=complex)
    nrm = lq_norm(v, q)[..., None]
    a = np.abs(v)
    ph = _phase(v)
    if math.isinf(q):
        idx = np.argmax(a, axis=-1)[..., None]
        g = np.zeros_like(v)
        np.put_along_axis(g, idx, np.take_along_axis(ph, idx, axis=-1),
                          axis=-1)
        return p * nrm ** (p - 1) * g
    if q == 1:
        return p * nrm ** (p - 1) * ph
    # d||w||^p = p ||w||^{p-q} |w_i|^{q-1} phase(w_i)
    safe = np.where(nrm > 0, nrm, 1.0)
    g = p * safe ** (p - 1) * (a / safe) ** (q - 1) * ph
    return np.where(nrm > 0, g, 0.0)


def pairing(u, v) -> complex:
    """Sesquilinear pairing sum(u * conj(v)) over all entries."""
    return complex(np.vdot(np.asarray(v), np.asarray(u)))

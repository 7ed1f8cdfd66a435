"""Finite coefficient sets in the complex plane and their convex hulls."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

DEDUP_TOL = 1e-12
CONTAINS_SLACK = 1e-12


def _as_complex(z) -> complex:
    if isinstance(z, (list, tuple)):
        if len(z) != 2:
            raise ValueError(f"expected [re, im] pair, got {z!r}")
        z = complex(float(z[0]), float(z[1]))
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite coefficient {z!r}")
    return z


def _dedup(points: Iterable[complex]) -> tuple[complex, ...]:
    out: list[complex] = []
    for z in sorted(points, key=lambda w: (w.real, w.imag)):
        if not any(abs(z - w) <= DEDUP_TOL for w in out):
            out.append(z)
    return tuple(out)


def _cross(o: complex, a: complex, b: complex) -> float:
    return ((a.real - o.real) * (b.imag - o.imag)
            - (a.imag - o.imag) * (b.real - o.real))


def _monotone_chain(pts: Sequence[complex]) -> list[complex]:
    # pts sorted lexicographically and deduplicated
    if len(pts) <= 2:
        return list(pts)
    lower: list[complex] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[complex] = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) == 2 and abs(hull[0] - hull[1]) <= DEDUP_TOL:
        return hull[:1]
    return hull


@dataclass(frozen=True)
class ConvexRegion:
    """Convex polygon given by its extreme points (counterclockwise).

    Degenerate hulls are a segment (two points) or a single point.
    """

    extreme_points: tuple[complex, ...]

    def contains(self, z, slack: float = CONTAINS_SLACK) -> bool:
        z = _as_complex(z)
        ext = self.extreme_points
        if len(ext) == 1:
            return abs(z - ext[0]) <= slack
        if len(ext) == 2:
            a, b = ext
            seg = b - a
            t = ((z - a) * seg.conjugate()).real / abs(seg) ** 2
            t = min(1.0, max(0.0, t))
            return abs(a + t * seg - z) <= slack * max(1.0, abs(seg))
        n = len(ext)
        for i in range(n):
            a, b = ext[i], ext[(i + 1) % n]
            # signed distance of z to the left of edge a->b
            if _cross(a, b, z) / abs(b - a) < -slack:
                return False
        return True

    def vertex_set(self) -> frozenset:
        return frozenset(complex(round(z.real, 9), round(z.imag, 9))
                         for z in self.extreme_points)

    def as_set(self) -> "CoefficientSet":
        return CoefficientSet(self.extreme_points)


class CoefficientSet:
    """A finite nonempty point set A in C (duplicates removed)."""

    def __init__(self, points: Iterable):
        pts = _dedup(_as_complex(z) for z in points)
        if not pts:
            raise ValueError("coefficient set must be nonempty")
        self.points: tuple[complex, ...] = pts

    def __repr__(self):
        return f"CoefficientSet({list(self.points)!r})"

    def __eq__(self, other):
        if not isinstance(other, CoefficientSet):
            return NotImplemented
        return (len(self.points) == len(other.points)
                and all(abs(a - b) <= DEDUP_TOL
                        for a, b in zip(self.points, other.points)))

    def __hash__(self):
        return hash(tuple((round(z.real, 9), round(z.imag, 9))
                          for z in self.points))

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def is_real(self) -> bool:
        return all(z.imag == 0 for z in self.points)

    def hull(self) -> ConvexRegion:
        return convex_hull(self)

    def extreme_points(self) -> tuple[complex, ...]:
        return convex_hull(self).extreme_points

    def to_json(self) -> list:
        return [[z.real, z.imag] for z in self.points]

    @classmethod
    def from_json(cls, obj) -> "CoefficientSet":
        return cls(obj)


def convex_hull(A) -> ConvexRegion:
    """Extreme points of Conv(A), counterclockwise from the lowest-left."""
    if not isinstance(A, CoefficientSet):
        A = CoefficientSet(A)
    return ConvexRegion(tuple(_monotone_chain(A.points)))


def scale(A: CoefficientSet, a) -> CoefficientSet:
    a = _as_complex(a)
    return CoefficientSet(a * z for z in A.points)


def conjugate(A: CoefficientSet) -> CoefficientSet:
    return CoefficientSet(z.conjugate() for z in A.points)


def minkowski_sum(A1: CoefficientSet, A2: CoefficientSet) -> CoefficientSet:
    return CoefficientSet(a + b for a in A1.points for b in A2.points)


def diameter(A) -> float:
    pts = A.points if isinstance(A, CoefficientSet) else tuple(A)
    ext = _monotone_chain(_dedup(pts))
    return max((abs(a - b) for a in ext for b in ext), default=0.0)


def max_modulus(A) -> float:
    pts = A.points if isinstance(A, CoefficientSet) else tuple(A)
    return max(abs(z) for z in pts)


def contains(hull: ConvexRegion, z) -> bool:
    return hull.contains(z)


def regular_polygon(n: int = 64, radius: float = 1.0) -> CoefficientSet:
    """Inscribed regular n-gon; increasing unions approximate the disk."""
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    return CoefficientSet(radius * cmath.exp(2j * math.pi * k / n)
                          for k in range(n))


def hull_subset(inner: ConvexRegion, outer: ConvexRegion) -> bool:
    """True when Conv(inner) lies in Conv(outer)."""
    return all(outer.contains(z, slack=1e-10) for z in inner.extreme_points)

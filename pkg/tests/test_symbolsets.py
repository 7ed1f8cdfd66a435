import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from umdlab.symbolsets import (CoefficientSet, conjugate, convex_hull,
                               diameter, hull_subset, max_modulus,
                               minkowski_sum, regular_polygon, scale)

coords = st.floats(-5, 5, allow_nan=False).map(lambda x: round(x, 6))
points = st.lists(st.builds(complex, coords, coords), min_size=1, max_size=12)


def test_hull_of_square_drops_interior():
    A = CoefficientSet([0, 1, 1 + 1j, 1j, 0.5 + 0.5j, 0.5])
    assert set(A.extreme_points()) == {0, 1, 1 + 1j, 1j}
    assert A.hull().contains(0.25 + 0.75j)
    assert not A.hull().contains(1.1)


def test_degenerate_hulls():
    seg = convex_hull([-1, 0, 1])
    assert len(seg.extreme_points) == 2
    assert seg.contains(0.3) and not seg.contains(0.3j)
    pt = convex_hull([2j, 2j])
    assert pt.extreme_points == (2j,)
    assert pt.contains(2j) and not pt.contains(0)


def test_empty_set_rejected():
    with pytest.raises(ValueError):
        CoefficientSet([])


def test_regular_polygon():
    P = regular_polygon(8)
    assert len(P.extreme_points()) == 8
    assert max_modulus(P) == pytest.approx(1)
    assert diameter(P) == pytest.approx(2)
    with pytest.raises(ValueError):
        regular_polygon(2)


@settings(max_examples=60, deadline=None)
@given(pts=points)
def test_hull_contains_every_point(pts):
    hull = convex_hull(pts)
    assert all(hull.contains(z, slack=1e-9) for z in pts)
    assert set(hull.extreme_points) <= set(CoefficientSet(pts).points)


@settings(max_examples=60, deadline=None)
@given(pts=points, a=st.builds(complex, coords, coords))
def test_scaling_and_conjugation_commute_with_hull(pts, a):
    A = CoefficientSet(pts)
    assert diameter(scale(A, a)) == pytest.approx(abs(a) * diameter(A),
                                                  abs=1e-9)
    assert max_modulus(conjugate(A)) == pytest.approx(max_modulus(A))
    assert hull_subset(A.hull(), CoefficientSet(list(pts) + [a]).hull())


@settings(max_examples=40, deadline=None)
@given(p1=points, p2=points)
def test_minkowski_sum_diameter_additive(p1, p2):
    A1, A2 = CoefficientSet(p1), CoefficientSet(p2)
    S = minkowski_sum(A1, A2)
    assert diameter(S) <= diameter(A1) + diameter(A2) + 1e-9
    assert max_modulus(S) <= max_modulus(A1) + max_modulus(A2) + 1e-9


def test_json_round_trip():
    A = CoefficientSet([1, -1j, 0.5 + 2j])
    assert CoefficientSet.from_json(A.to_json()) == A
    assert not A.is_real and CoefficientSet([-1, 1]).is_real


def test_disk_approximation_monotone():
    small, big = regular_polygon(8), regular_polygon(64)
    assert hull_subset(small.hull(), big.hull())
    assert not hull_subset(big.hull(), small.hull())
    z = cmath.exp(1j * math.pi / 8)
    assert big.hull().contains(0.99 * z) and not small.hull().contains(0.99 * z)

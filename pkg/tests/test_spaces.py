import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from umdlab.spaces import (SCALAR, SpaceSpec, Vec, dual_exponent, lq_norm,
                           norm_pow_subgradient, p_star)


def test_dual_exponent_pairs():
    assert dual_exponent(2) == 2
    assert dual_exponent(4) == pytest.approx(4 / 3)
    assert dual_exponent(1) == math.inf
    assert dual_exponent(math.inf) == 1
    with pytest.raises(ValueError):
        dual_exponent(0.5)


def test_p_star_symmetric():
    for p in (1.2, 1.5, 2.0, 3.0, 4.0):
        assert p_star(p) == pytest.approx(p_star(dual_exponent(p)))
    assert p_star(4) - 1 == 3


def test_lq_norm_matches_numpy(rng):
    v = rng.normal(size=(20, 5)) + 1j * rng.normal(size=(20, 5))
    for q in (1, 1.5, 2, 3, math.inf):
        np.testing.assert_allclose(lq_norm(v, q),
                                   np.linalg.norm(v, ord=q, axis=-1),
                                   rtol=1e-12)


def test_lq_norm_no_overflow():
    v = np.array([1e200, 1e200])
    assert lq_norm(v, 6) == pytest.approx(1e200 * 2 ** (1 / 6))


@settings(max_examples=50, deadline=None)
@given(q=st.sampled_from([1.5, 2.0, 3.0, math.inf]),
       p=st.floats(1.2, 5.0), seed=st.integers(0, 10_000))
def test_subgradient_directional_derivative(q, p, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    g = norm_pow_subgradient(v, q, p)
    t = 1e-6
    fd = (lq_norm(v + t * h, q) ** p - lq_norm(v - t * h, q) ** p) / (2 * t)
    assert np.real(np.vdot(g, h)) == pytest.approx(fd, rel=1e-4, abs=1e-6)


def test_subgradient_euler_identity(rng):
    # <g, v> = p ||v||^p for the p-th power of a norm
    v = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
    for q in (1.5, 2.0, 4.0):
        g = norm_pow_subgradient(v, q, 3.0)
        lhs = np.real(np.sum(np.conj(g) * v, axis=-1))
        np.testing.assert_allclose(lhs, 3.0 * lq_norm(v, q) ** 3, rtol=1e-10)


def test_zero_subgradient():
    np.testing.assert_array_equal(norm_pow_subgradient(np.zeros(3), 2, 2),
                                  np.zeros(3))


def test_space_spec_validation_and_json():
    with pytest.raises(ValueError):
        SpaceSpec(0, 2)
    with pytest.raises(ValueError):
        SpaceSpec(2, 0.5)
    s = SpaceSpec(3, math.inf)
    assert SpaceSpec.from_json(s.to_json()) == s
    assert s.dual.exponent == 1
    assert SpaceSpec.from_json(None) == SCALAR


def test_vec_arithmetic():
    s = SpaceSpec(2, 2)
    u = Vec(s, [3, 4])
    assert u.norm() == pytest.approx(5)
    assert (u - u).norm() == 0
    assert (2 * u).norm() == pytest.approx(10)
    with pytest.raises(ValueError):
        u + Vec(SpaceSpec(2, 3), [1, 1])
    with pytest.raises(ValueError):
        Vec(s, [1, 2, 3])

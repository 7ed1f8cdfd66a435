import numpy as np
import pytest

from umdlab.lpnorm import (GridField, MultiplierOperator, adjoint, apply,
                           extend_dimension, grid_lp_norm, grid_pairing,
                           matrix_norm_lower_bound, norm_lower_bound,
                           resolution_sweep, tile_resolution)
from umdlab.multipliers import (BeurlingAhlfors, PowerQuotient,
                                constant_table, lattice_table, pad)
from umdlab.properties import shipped_symbols
from umdlab.spaces import SCALAR, dual_exponent


def _random_field(rng, N, d=2):
    return GridField(d, N, SCALAR,
                     rng.normal(size=(N,) * d) + 1j * rng.normal(size=(N,) * d))


def test_apply_is_linear(rng):
    op = MultiplierOperator(lattice_table(BeurlingAhlfors(), 16))
    f, g = _random_field(rng, 16), _random_field(rng, 16)
    lhs = apply(op, f + 2.5j * g).samples
    rhs = apply(op, f).samples + 2.5j * apply(op, g).samples
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_adjoint_pairing(rng):
    op = MultiplierOperator(lattice_table(shipped_symbols()["PlusConstant"], 8))
    f, g = _random_field(rng, 8), _random_field(rng, 8)
    assert grid_pairing(apply(op, f), g) == pytest.approx(
        grid_pairing(f, apply(adjoint(op), g)), abs=1e-10)


def test_identity_multiplier_norm_one(rng):
    op = MultiplierOperator(constant_table(1.0, 8, 2))
    est = norm_lower_bound(op, 4.0, restarts=2)
    assert est.value == pytest.approx(1.0, abs=1e-12)


def test_grid_lp_norm_of_constant():
    f = GridField(1, 8, SCALAR, np.full(8, 3.0))
    assert grid_lp_norm(f, 3.0) == pytest.approx(3.0)


@pytest.mark.parametrize("name", sorted(shipped_symbols()))
def test_p2_equals_max_modulus(name):
    tab = lattice_table(shipped_symbols()[name], 16)
    est = norm_lower_bound(MultiplierOperator(tab), 2.0)
    assert est.value == pytest.approx(tab.max_modulus, abs=1e-8)
    assert est.value <= tab.max_modulus * (1 + 1e-12)


def test_estimate_is_achieved_ratio():
    op = MultiplierOperator(lattice_table(BeurlingAhlfors(), 16))
    est = norm_lower_bound(op, 4.0, restarts=3)
    assert est.recompute(op, 4.0) == pytest.approx(est.value, rel=1e-12)
    assert all(b >= a - 1e-15 for a, b in zip(est.trace, est.trace[1:]))


def test_seeded_reproducible():
    op = MultiplierOperator(lattice_table(BeurlingAhlfors(), 16))
    a = norm_lower_bound(op, 3.0, restarts=3, seed=7)
    b = norm_lower_bound(op, 3.0, restarts=3, seed=7)
    assert a.value == b.value


def test_tiling_preserves_homogeneous_ratio(rng):
    spec = PowerQuotient((1.0, -1.0))
    f = _random_field(rng, 8)
    r1 = (grid_lp_norm(apply(MultiplierOperator(lattice_table(spec, 8)), f), 4)
          / grid_lp_norm(f, 4))
    g = tile_resolution(f)
    r2 = (grid_lp_norm(apply(MultiplierOperator(lattice_table(spec, 16)), g),
                       4) / grid_lp_norm(g, 4))
    assert r2 == pytest.approx(r1, rel=1e-12)


def test_resolution_sweep_monotone():
    ests = resolution_sweep(
        lambda N: MultiplierOperator(lattice_table(PowerQuotient((1, -1)), N)),
        4.0, [8, 16, 32], restarts=2)
    vals = [e.value for e in ests]
    assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    assert 1 < vals[-1] <= 3 + 1e-6
    with pytest.raises(ValueError):
        resolution_sweep(lambda N: MultiplierOperator(
            lattice_table(PowerQuotient((1, -1)), N)), 4.0, [8, 12])


def test_extend_dimension_keeps_padded_ratio(rng):
    spec = PowerQuotient((1.0, -1.0))
    f = _random_field(rng, 8)
    # the zero mode is a ball average, which depends on the dimension
    f = f.with_samples(f.samples - f.samples.mean())
    r2 = (grid_lp_norm(apply(MultiplierOperator(lattice_table(spec, 8)), f), 3)
          / grid_lp_norm(f, 3))
    g = extend_dimension(f)
    op3 = MultiplierOperator(lattice_table(pad(spec, 3), 8))
    assert grid_lp_norm(apply(op3, g), 3) / grid_lp_norm(g, 3) == \
        pytest.approx(r2, rel=1e-10)


def test_matrix_duality(rng):
    T = rng.normal(size=(6, 6))
    for p in (1.5, 3.0):
        a = matrix_norm_lower_bound(T, p, restarts=16).value
        b = matrix_norm_lower_bound(T.T, dual_exponent(p), restarts=16).value
        assert a == pytest.approx(b, rel=1e-4)
    assert matrix_norm_lower_bound(T, 2.0).value == pytest.approx(
        np.linalg.norm(T, 2), rel=1e-8)


def test_field_io(tmp_path, rng):
    f = _random_field(rng, 4)
    f.save(tmp_path / "f")
    np.testing.assert_array_equal(GridField.load(tmp_path / "f").samples,
                                  f.samples)
    with pytest.raises(ValueError):
        GridField(2, 4, SCALAR, np.zeros((4, 5)))

import math

import numpy as np
import pytest
from scipy import integrate

from umdlab.multipliers import (BanuelosBogdan, BeurlingAhlfors,
                                Counterexample, KappaQuotient, LevyAtom,
                                LogQuotient, PowerQuotient, ShiftedPower,
                                SphereAtom, SphericalPower, ball_average,
                                compose, evaluate, kappa, lattice_table,
                                load_complex_array, pad, plus_constant,
                                sphere_atoms_from_basis, symbol_from_json,
                                validate)
from umdlab.properties import shipped_symbols


def test_power_quotient_values():
    m = PowerQuotient((1, -1))
    assert evaluate(m, [1, 0]) == 1
    assert evaluate(m, [1, 1]) == 0
    assert evaluate(m, [0, 0]) == 0
    with pytest.raises(ValueError):
        m([1, 2, 3])
    with pytest.raises(ValueError):
        PowerQuotient((1, -1), alpha=2.5)


def test_beurling_ahlfors_at_i():
    assert evaluate(BeurlingAhlfors(), [0, 1]) == pytest.approx(-1)
    assert evaluate(BeurlingAhlfors(), [1, 1]) == pytest.approx(-1j)


def test_bb_with_sphere_atoms_only_is_power_quotient(rng):
    a = [1.0, -0.5j, 2.0]
    bb = BanuelosBogdan(3, (), sphere_atoms_from_basis(a))
    pq = PowerQuotient(tuple(a))
    xi = rng.normal(size=(500, 3))
    np.testing.assert_allclose(bb(xi), pq(xi), atol=1e-12)


def test_atom_validation():
    with pytest.raises(ValueError):
        SphereAtom((1.0, 1.0), 1.0, 1.0)
    with pytest.raises(ValueError):
        SphereAtom((1.0, 0.0), -1.0, 1.0)
    with pytest.raises(ValueError):
        LevyAtom((0.0, 0.0), 1.0, 1.0)


def test_compose_pad_shift():
    base = PowerQuotient((2.0, -1.0))
    swap = np.array([[0.0, 1.0], [1.0, 0.0]])
    xi = np.random.default_rng(0).normal(size=(50, 2))
    np.testing.assert_allclose(compose(base, swap)(xi),
                               PowerQuotient((-1.0, 2.0))(xi), atol=1e-14)
    np.testing.assert_allclose(compose(base, np.eye(2))(xi), base(xi))
    xi3 = np.random.default_rng(1).normal(size=(50, 3))
    np.testing.assert_allclose(pad(base, 3)(xi3), base(xi3[:, :2]))
    assert evaluate(plus_constant(PowerQuotient((1, 0)), 0.5), [1, 0]) == 1.5
    with pytest.raises(ValueError):
        compose(base, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        pad(base, 2)


def test_validate_flags():
    r = validate(PowerQuotient((1, -1)), samples=200)
    assert r.even and r.homogeneous
    assert set(r.range_hull.extreme_points) <= {-1, 1}
    assert not validate(ShiftedPower(2, 2.0, 1.0), samples=200).homogeneous
    r = validate(Counterexample(2), samples=200)
    assert r.even and r.homogeneous
    assert all(abs(z) <= 1 + 1e-12 for z in r.range_hull.extreme_points)


def test_kappa_limits():
    t = np.array([1e-8, 1.0, 1e8])
    k = kappa(t, 0.5, 1.5)
    assert k[0] == pytest.approx(0, abs=1e-3)
    assert k[1] == pytest.approx(0.5)
    assert k[2] == pytest.approx(1, abs=1e-3)


@pytest.mark.parametrize("u,v", [(0.0, 2.0), (0.5, 1.5), (1.0, 2.0)])
def test_kappa_quotient_is_alpha_average(u, v, rng):
    m = KappaQuotient(u, v, 1.0, -1.0)
    for xi in rng.normal(size=(20, 2)):
        # alpha must stay in (0, 2]; the integrand is continuous at 0
        quad = integrate.quad(
            lambda al: PowerQuotient((1.0, -1.0), max(al, 1e-12))(xi).real,
            u, v, epsabs=1e-13)[0] / (v - u)
        assert evaluate(m, xi).real == pytest.approx(quad, abs=1e-6)


def test_counterexample_unimodular_off_axes(rng):
    xi = rng.normal(size=(100, 3))
    np.testing.assert_allclose(np.abs(Counterexample(3)(xi)), 1.0)
    assert evaluate(Counterexample(2), [0.0, 1.0]) == 0


@pytest.mark.parametrize("name", sorted(shipped_symbols()))
def test_json_round_trip_and_homogeneity(name, rng):
    spec = shipped_symbols()[name]
    back = symbol_from_json(spec.to_json())
    xi = rng.normal(size=(30, spec.dim))
    np.testing.assert_allclose(back(xi), spec(xi), atol=1e-14)
    np.testing.assert_allclose(spec(-xi), spec(xi), atol=1e-12)
    if spec.is_homogeneous():
        np.testing.assert_allclose(spec(3.7 * xi), spec(xi), atol=1e-12)


def test_unknown_tag():
    with pytest.raises(ValueError):
        symbol_from_json({"tag": "Nope"})


def test_lattice_table_zero_mode_and_io(tmp_path):
    spec = PowerQuotient((1.0, -1.0))
    tab = lattice_table(spec, 8)
    assert tab.zero_mode == pytest.approx(ball_average(spec))
    assert abs(tab.zero_mode) < 0.05
    assert tab.at((1, 0)) == pytest.approx(1)
    assert tab.at((1, 1)) == pytest.approx(0)
    assert tab.max_modulus <= 1 + 1e-12 and tab.is_real
    tab.save(tmp_path / "t")
    back = type(tab).load(tmp_path / "t")
    np.testing.assert_array_equal(back.values, tab.values)
    with pytest.raises(ValueError):
        lattice_table(spec, 1)


def test_log_quotient_and_spherical_ranges(rng):
    xi = rng.normal(size=(200, 2))
    lq = LogQuotient(2, (SphereAtom((1.0, 0.0), 1.0, 1.0),
                         SphereAtom((0.0, 1.0), 1.0, -1.0)))
    assert np.all(np.abs(lq(xi)) <= 1 + 1e-12)
    sp = SphericalPower(2, 1.0, (SphereAtom((1.0, 0.0), 1.0, 2.0),))
    np.testing.assert_allclose(sp(xi)[xi[:, 0] != 0], 2.0)

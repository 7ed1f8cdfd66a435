"""One test per acceptance criterion, each run through its shipped recipe at
the full tier, with the stated tolerance and runtime limit."""
import json
import time

import pytest

from umdlab.recipes import load_recipes, run_recipes
from umdlab.spaces import p_star

# seconds; criterion 1 is per symbol and resolution
LIMITS = {1: 10, 2: 30, 3: 300, 4: 30, 5: 600, 6: 60, 7: 120,
          8: 180, 9: 120, 10: 30}

_BY_CRITERION = {r.criterion: r.name for r in load_recipes()}


def _run(criterion):
    out = run_recipes("full", names=[_BY_CRITERION[criterion]])
    assert len(out) == 1
    return out[0]


def _rows(outcome, quantity, method):
    return [(json.loads(r.params_json), r.value) for r in outcome.report.rows
            if r.quantity == quantity and r.method == method]


def _failed(outcome):
    return [r.quantity for r in outcome.report.failures()]


def test_criterion_01_p2_exactness(acceptance):
    out = _run(1)
    rows = _rows(out, "check:p2_exactness", "analytic")
    slowest = max(prm["seconds"] for prm, _ in rows)
    ok = out.passed and slowest < LIMITS[1]
    ok &= {prm["N"] for prm, _ in rows} == {16, 64}
    acceptance(1, ok, f"{len(rows)} symbol/N cases, max error "
               f"{max(v for _, v in rows):.1e}, slowest {slowest:.2f} s")
    assert ok, _failed(out)


def test_criterion_02_singleton_scaling(acceptance):
    out = _run(2)
    ok = out.passed and out.seconds < LIMITS[2]
    acceptance(2, ok, f"{out.seconds:.1f} s")
    assert ok, _failed(out)


def test_criterion_03_known_constant(acceptance):
    out = _run(3)
    msgs, ok = [], out.passed and out.seconds < LIMITS[3]
    for quantity, method, key, top in (("beta_lower", "martingale", "depth", 10),
                                       ("mult_norm_lower", "fft", "N", 64)):
        for p in (4 / 3, 4.0):
            seq = sorted((prm[key], v) for prm, v in _rows(out, quantity,
                                                           method)
                         if prm["p"] == pytest.approx(p))
            vals = [v for _, v in seq]
            ok &= seq[-1][0] == top
            ok &= all(1 < v <= p_star(p) - 1 + 1e-6 for v in vals)
            ok &= all(b >= a for a, b in zip(vals, vals[1:]))
            msgs.append(f"{method} p={p:.3g}: {vals[-1]:.4f}")
    acceptance(3, ok, ", ".join(msgs) + f" ({out.seconds:.1f} s)")
    assert ok, _failed(out)


def test_criterion_04_bellman_fixed_point(acceptance):
    out = _run(4)
    ok = out.passed and out.seconds < LIMITS[4]
    acceptance(4, ok, f"{out.seconds:.1f} s")
    assert ok, _failed(out)


def test_criterion_05_bellman_threshold(acceptance):
    out = _run(5)
    ok = out.passed and out.seconds < LIMITS[5]
    msgs = []
    for prm, v in _rows(out, "beta_hat", "bellman"):
        if prm["p"] == 4.0:
            assert prm["M"] == 201 and prm["L"] == 4.0
            ok &= 2.55 <= v <= 3.45
        else:
            ok &= abs(v - 1.0) <= 0.05
        msgs.append(f"{{{prm['b']:g},{prm['B']:g}}} p={prm['p']:g}: {v:.4f}")
    acceptance(5, ok, ", ".join(msgs) + f" ({out.seconds:.1f} s)")
    assert ok, _failed(out)


def test_criterion_06_lifting(acceptance):
    out = _run(6)
    ok = out.passed and out.seconds < LIMITS[6]
    acceptance(6, ok, f"{out.seconds:.1f} s")
    assert ok, _failed(out)


def test_criterion_07_adapted_hull(acceptance):
    out = _run(7)
    ok = out.passed and out.seconds < LIMITS[7]
    acceptance(7, ok, f"{len(out.report.verdicts)} cases, "
               f"{out.seconds:.1f} s")
    assert ok, _failed(out)


def test_criterion_08_counterexample(acceptance):
    out = _run(8)
    ok = out.passed and out.seconds < LIMITS[8]
    by_p = {}
    for prm, v in _rows(out, "mult_norm_lower", "fft"):
        by_p.setdefault(prm["p"], []).append((prm["N"], v))
    p4 = [v for _, v in sorted(by_p[4.0])]
    p2 = [v for _, v in sorted(by_p[2.0])]
    ok &= [n for n, _ in sorted(by_p[4.0])] == [16, 32, 64, 128]
    ok &= all(b > a for a, b in zip(p4, p4[1:]))
    ok &= max(p2) <= 1 + 1e-8
    acceptance(8, ok, "p=4: " + ", ".join(f"{v:.3f}" for v in p4)
               + f"; p=2 max {max(p2):.6f} ({out.seconds:.1f} s)")
    assert ok, _failed(out)


def test_criterion_09_duality(acceptance):
    out = _run(9)
    ok = out.passed and out.seconds < LIMITS[9]
    acceptance(9, ok, f"{out.seconds:.1f} s")
    assert ok, _failed(out)


def test_criterion_10_bb_reduction(acceptance):
    out = _run(10)
    ok = out.passed and out.seconds < LIMITS[10]
    acceptance(10, ok, f"{out.seconds:.1f} s")
    assert ok, _failed(out)

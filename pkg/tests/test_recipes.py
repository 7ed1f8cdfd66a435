import json
import time

import jsonschema
import pytest
from importlib import resources

from umdlab import harness
from umdlab.recipes import load_recipes, recipe_dir, run_recipes


def _schema():
    path = resources.files("umdlab") / "data" / "experiment_config.schema.json"
    return json.loads(path.read_text())


def _references():
    path = resources.files("umdlab") / "data" / "references.json"
    return json.loads(path.read_text())


def test_one_recipe_per_criterion():
    crit = sorted(r.criterion for r in load_recipes())
    assert crit == list(range(1, 11))


def test_recipes_validate_against_schema():
    schema = _schema()
    for path in recipe_dir().iterdir():
        if path.name.endswith(".json"):
            jsonschema.validate(json.loads(path.read_text())["config"], schema)


def test_config_round_trip_validates():
    schema = _schema()
    for rec in load_recipes():
        for cfg in rec.configs:
            jsonschema.validate(cfg.to_json(), schema)


def test_unknown_tier():
    with pytest.raises(ValueError):
        run_recipes("medium")


def test_smoke_tier_passes_quickly():
    t0 = time.perf_counter()
    outcomes = run_recipes("smoke")
    assert time.perf_counter() - t0 < 300
    assert [o.name for o in outcomes if not o.passed] == []


def _matching(rows, ref):
    out = []
    for r in rows:
        if (r.experiment_id, r.quantity, r.method) != (
                ref["experiment_id"], ref["quantity"], ref["method"]):
            continue
        params = json.loads(r.params_json)
        if all(params.get(k) == v for k, v in ref["params"].items()):
            out.append(r.value)
    return out


@pytest.mark.parametrize("name,eid", [("05_bellman_threshold", "bellman-01"),
                                      ("05_bellman_threshold", "bellman-pm1"),
                                      ("08_counterexample", "counterexample")])
def test_frozen_references(name, eid):
    refs = _references()
    rows = run_recipes("full", names=[name])[0].report.rows
    checked = 0
    for ref in refs["references"]:
        if ref["experiment_id"] != eid:
            continue
        vals = _matching(rows, ref)
        assert len(vals) == 1, ref
        assert vals[0] == pytest.approx(ref["value"], rel=refs["rel_tol"])
        checked += 1
    assert checked > 0

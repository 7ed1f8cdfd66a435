import json

import pytest

from umdlab import cli, harness
from umdlab.harness import ExperimentConfig, Report


def _cfg(**kw):
    doc = {"experiment_id": "t", "kind": "IdentityCheck", "p": [2.0],
           "depths": [3], "resolutions": [8], "restarts": 2}
    doc.update(kw)
    return ExperimentConfig.from_json(doc)


def test_empty_report_is_header_only():
    assert harness.to_csv(Report()) == ",".join(harness.CSV_COLUMNS) + "\n"


@pytest.mark.parametrize("bad", [
    {"kind": "Nope"},
    {"p": [1.0]},
    {"restarts": 0},
    {"resolutions": [1]},
    {"kind": "BellmanSweep", "A": [[1, 0], [1, 0]]},
    {"kind": "BellmanSweep", "M": 100},
    {"kind": "PropertySuite", "checks": []},
    {"unknown_key": 1},
])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        _cfg(**bad)


def test_config_json_round_trip_and_hash():
    cfg = _cfg(A=[[0.5, 1.0], [2.0, 0.0]], outputs={"csv": "x.csv"})
    back = ExperimentConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert back == cfg
    # outputs do not change the hash; parameters do
    assert _cfg(outputs={"a": 1}).config_hash() == _cfg().config_hash()
    assert _cfg(seed=1).config_hash() != _cfg().config_hash()
    assert _cfg(p=[2]).config_hash() == _cfg(p=[2.0]).config_hash()


def test_analytic_bounds():
    assert harness.analytic_bounds([2j], 4.0)[:2] == (2.0, 2.0)
    lo, hi, src = harness.analytic_bounds([-1, 1], 4.0)
    assert (lo, hi) == pytest.approx((3.0, 3.0)) and src == "real sandwich"
    lo, hi, _ = harness.analytic_bounds([0, 1], 4.0)
    assert lo == pytest.approx(1.5) and hi == pytest.approx(2.0)
    lo, hi, _ = harness.analytic_bounds([0.5, 2], 2.0)
    assert lo == hi == 2.0


def test_csv_byte_identical_without_timing():
    cfg = _cfg(p=[2.0, 4.0])
    a = harness.to_csv(harness.run_batch([cfg], timing=False))
    b = harness.to_csv(harness.run_batch([cfg], timing=False, threads=2))
    assert a == b
    assert a.splitlines()[0] == ",".join(harness.CSV_COLUMNS)


def test_identity_check_verdicts_pass():
    rep = harness.run_experiment(_cfg(p=[2.0, 4.0], A=[[-1, 0], [1, 0]]))
    assert rep.verdicts and rep.all_passed
    assert {r.method for r in rep.rows} <= set(harness.METHODS)


def test_cache_hit_and_miss(tmp_path):
    cfg = _cfg()
    assert harness.cache_lookup(cfg, tmp_path) is None
    first = harness.run_experiment(cfg, cache_dir=tmp_path, timing=False)
    hit = harness.cache_lookup(cfg, tmp_path)
    assert hit is not None and hit.rows == first.rows
    assert harness.cache_lookup(_cfg(seed=5), tmp_path) is None
    assert harness.cache_lookup(cfg, tmp_path, smoke=True) is None


def test_emit_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="cannot write report"):
        harness.emit(Report(), "csv", blocker / "sub" / "r.csv")
    with pytest.raises(ValueError):
        harness.emit(Report(), "xml", tmp_path / "r.xml")


def test_load_configs_object_or_list(tmp_path):
    one = tmp_path / "one.json"
    one.write_text(json.dumps(_cfg().to_json()))
    many = tmp_path / "many.json"
    many.write_text(json.dumps([_cfg().to_json(), _cfg(seed=2).to_json()]))
    assert len(harness.load_configs(one)) == 1
    assert len(harness.load_configs(many)) == 2


def test_cli_exit_ok(tmp_path, capsys):
    code = cli.main(["identity-check", "--A=-1,1", "--p", "2",
                     "--depths", "3", "--resolutions", "8", "--restarts", "2",
                     "--out", str(tmp_path), "--no-timing"])
    assert code == 0
    assert (tmp_path / "identity-check.csv").exists()
    assert "PASS" in capsys.readouterr().out


def test_cli_exit_fail(tmp_path):
    # a constant symbol cannot have strictly increasing estimates
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "experiment_id": "flat", "kind": "CounterexampleSweep",
        "p": [4.0], "resolutions": [8, 16], "restarts": 2,
        "symbol": {"tag": "PowerQuotient", "a": [[1, 0], [1, 0]]}}))
    assert cli.main(["report", "--config", str(cfg), "--out",
                     str(tmp_path)]) == 2


def test_cli_exit_error(tmp_path):
    assert cli.main(["recipes", "run", "--tier", "bogus",
                     "--out", str(tmp_path)]) == 1
    assert cli.main(["mult-norm", "--symbol", '{"tag": "Nope"}',
                     "--out", str(tmp_path)]) == 1
    assert cli.main(["bellman", "--M", "not-a-number"]) == 1


def test_cli_beta_estimate_writes_witness(tmp_path):
    assert cli.main(["beta-estimate", "--A", "0,1", "--p", "4", "--depth", "3",
                     "--restarts", "2", "--out", str(tmp_path),
                     "--format", "json"]) == 0
    doc = json.loads((tmp_path / "beta-witness.json").read_text())
    assert doc["depth"] == 3 and 1 <= doc["ratio"] <= 2
    rows = json.loads((tmp_path / "beta-estimate.json").read_text())
    assert rows[0]["method"] == "martingale"

import json

import pytest
from click.testing import CliRunner

from normalmarket.cli import main

TRADING = "fixture:trading?v=0.43"


@pytest.fixture
def runner():
    return CliRunner()


def test_solve_summary(runner):
    res = runner.invoke(main, ["solve", TRADING])
    assert res.exit_code == 0
    assert res.output.splitlines()[0] == (
        "unique equilibrium; supply price 50/43; traded volume 2/5; demand price 2; rationing: no"
    )
    assert "1.1627906976744186046" in res.output


def test_solve_without_equilibrium(runner):
    res = runner.invoke(main, ["solve", "fixture:trading?v=0.8"])
    assert res.exit_code == 0
    assert "no equilibrium" in res.output


def test_solve_json_uses_rational_strings(runner):
    res = runner.invoke(main, ["solve", TRADING, "--json"])
    doc = json.loads(res.output)
    assert doc["kind"] == "UniquePositiveProfit"
    assert doc["candidates"][0]["supply"] == {"price": "50/43", "mass": "2/5"}


def test_solve_then_verify_round_trip(runner, tmp_path):
    out = tmp_path / "o"
    assert runner.invoke(main, ["solve", TRADING, "--out", str(out)]).exit_code == 0
    assert json.loads((out / "manifest.json").read_text())["command"] == "solve"
    res = runner.invoke(main, ["verify", TRADING, str(out / "equilibria.json")])
    assert res.exit_code == 0
    assert json.loads(res.output)["passed"] is True


def test_verify_tampered_candidate(runner, tmp_path):
    out = tmp_path / "o"
    runner.invoke(main, ["solve", TRADING, "--out", str(out)])
    doc = json.loads((out / "equilibria.json").read_text())
    doc["candidates"][0]["supply"]["price"] = "1"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    res = runner.invoke(main, ["verify", TRADING, str(bad)])
    assert res.exit_code == 1
    assert "Not Higher Supply Price" in json.loads(res.output)["violated"]


def test_verify_malformed_candidate(runner, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert runner.invoke(main, ["verify", TRADING, str(bad)]).exit_code == 2


def test_bad_spec_reports_field_paths(runner, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "trading", "suppliers": [{"weight": {"mass": "x"}, "h1": 1}], "demanders": []}))
    res = runner.invoke(main, ["solve", str(spec)])
    assert res.exit_code == 2
    assert "suppliers.0.weight.mass" in res.output
    assert "suppliers.0.v" in res.output


def test_unknown_fixture_is_usage_error(runner):
    assert runner.invoke(main, ["solve", "fixture:nope"]).exit_code == 2


def test_validate(runner, tmp_path):
    res = runner.invoke(main, ["validate", TRADING, "--out", str(tmp_path)])
    assert res.exit_code == 0
    assert json.loads((tmp_path / "conditions.json").read_text()) == json.loads(res.output)


def test_validate_failing_spec(runner, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({
        "kind": "trading",
        "suppliers": [{"weight": {"mass": "1"}, "h1": "1", "v": "1", "h0": "0"}],
        "demanders": [{"weight": {"mass": "1"}, "eta1": "1", "eta0": "2"}],
    }))
    res = runner.invoke(main, ["validate", str(spec)])
    assert res.exit_code == 1
    assert json.loads(res.output)["well_behaved"] is False


def test_fixtures_listing(runner):
    res = runner.invoke(main, ["fixtures"])
    assert res.exit_code == 0
    names = [line.split("\t")[0] for line in res.output.splitlines()]
    assert "fixture:trading?v=0.43" in names
    assert "fixture:credit_basic?v=1/2" in names


def test_graph_exports(runner, tmp_path):
    res = runner.invoke(main, ["graph", TRADING, "--out", str(tmp_path)])
    assert res.exit_code == 0
    for name in ("real_supply.csv", "real_demand.csv", "demand_revenue.csv", "supply_cost_upper.csv",
                 "supply_cost_lower.csv", "graphs.json", "manifest.json"):
        assert (tmp_path / name).stat().st_size > 0
    json.loads((tmp_path / "graphs.json").read_text())


def _simulate(runner, out, seed_flag="1", env=None):
    args = ["simulate", TRADING, "--n", "300", "--mediators", "10", "--reps", "2", "--seed", seed_flag, "--out", str(out)]
    return runner.invoke(main, args, env=env or {})


def test_simulate_outputs_are_byte_identical(runner, tmp_path):
    env = {"SOURCE_DATE_EPOCH": "0"}
    a, b = tmp_path / "a", tmp_path / "b"
    ra, rb = _simulate(runner, a, env=env), _simulate(runner, b, env=env)
    assert ra.exit_code == rb.exit_code == 0
    assert ra.output == rb.output
    for f in sorted(p.name for p in a.iterdir()):
        if f == "manifest.json":
            ma, mb = json.loads((a / f).read_text()), json.loads((b / f).read_text())
            assert ma.pop("output_dir") != mb.pop("output_dir")
            assert ma == mb
            assert ma["timestamp"] == "1970-01-01T00:00:00+00:00"
        else:
            assert (a / f).read_bytes() == (b / f).read_bytes()


def test_nm_seed_overrides_flag(runner, tmp_path):
    env = {"SOURCE_DATE_EPOCH": "0"}
    plain = _simulate(runner, tmp_path / "a", seed_flag="5", env=env)
    overridden = _simulate(runner, tmp_path / "b", seed_flag="1", env={**env, "NM_SEED": "5"})
    assert plain.output == overridden.output
    assert json.loads((tmp_path / "b" / "manifest.json").read_text())["seed"] == 5


def test_bad_nm_seed_is_usage_error(runner, tmp_path):
    assert _simulate(runner, tmp_path, env={"NM_SEED": "abc"}).exit_code == 2

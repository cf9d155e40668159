import csv
import json

import pytest
import yaml

from osclab.frequencies import resonance_module
from osclab.lab import (
    STAGES,
    ScenarioError,
    builtin_names,
    emit,
    load_scenario,
    run_pipeline,
    scenario_from_dict,
)
from osclab.lab.emit import dumps_json
from osclab.symbols import average


@pytest.fixture(autouse=True)
def cache(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_CACHE_DIR", str(tmp_path / "cache"))
    return tmp_path / "cache"


def raw(name="AL2"):
    return json.loads(json.dumps(load_scenario(name).data))


def test_builtins_available():
    assert builtin_names() == ["AL2", "AL2_V0", "NR12"]
    s = load_scenario("AL2")
    m = resonance_module(s.omega)
    assert average(s.A, m) == s.A and average(s.V, m) == s.V


def test_nonresonant_builtin_averages_coupling_away():
    s = load_scenario("NR12")
    assert average(s.V, resonance_module(s.omega)).coeffs == {}


def test_nonreal_symbol_rejected():
    r = raw()
    r["A"] = [{"alpha": [1, 0], "beta": [0, 0], "re": 0, "im": 1}]
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(r)
    assert exc.value.errors == [("A", "symbol is not real-valued")]


@pytest.mark.parametrize("field,value,where", [
    ("hbar_list", [0.05, 0.1], "hbar_list"),
    ("delta_rule", "cubic", "delta_rule"),
    ("omega", [1, -2], "omega[1]"),
    ("bogus", 1, "bogus"),
    ("basis", {"W": -1}, "basis.W"),
    ("control", {"n_angle": 2.5}, "control.n_angle"),
])
def test_schema_violations_name_the_field(field, value, where):
    r = raw()
    r[field] = value
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict(r)
    assert where in [f for f, _ in exc.value.errors]


def test_missing_required_fields():
    with pytest.raises(ScenarioError) as exc:
        scenario_from_dict({"name": "x"})
    assert {"omega", "A", "V"} <= {f for f, _ in exc.value.errors}


def test_round_trip_preserves_hash(tmp_path):
    s = load_scenario("AL2")
    p = tmp_path / "s.yaml"
    p.write_text(s.to_yaml())
    assert load_scenario(p).hash == s.hash
    q = tmp_path / "s.json"
    q.write_text(s.canonical())
    assert load_scenario(q).hash == s.hash


def test_yaml_exponent_strings_accepted(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(
        "name: t\nomega: [1, 1]\nA: [{alpha: [1, 0], beta: [1, 0], re: 1}]\nV: []\n"
        "tolerances: {tol_zero: 1e-3}\n"
    )
    assert load_scenario(p)["tolerances"]["tol_zero"] == 1e-3


def test_unknown_file_is_a_scenario_error(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: [unclosed")
    with pytest.raises(ScenarioError):
        load_scenario(bad)


def test_overrides_revalidate():
    s = load_scenario("AL2")
    assert s.replace(**{"basis.W": 0.3})["basis"]["W"] == 0.3
    with pytest.raises(ScenarioError):
        s.replace(hbar_list=[0.1, 0.2])


def test_uncoupled_pipeline(tmp_path):
    man = run_pipeline(load_scenario("AL2_V0"))
    assert man.complete and man.verify()
    assert man.outputs["control"]["invariance_flag"]
    for row in man.outputs["gap"]["rows"]:
        assert row["min_beta_over_delta"] == pytest.approx(0.5, abs=1e-10)
    emit(man, tmp_path / "out")
    summ = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert all(abs(v - 0.5) < 1e-10 for v in summ["min_beta_over_delta"])


def test_full_pipeline_and_cache(tmp_path):
    s = load_scenario("AL2")
    man = run_pipeline(s, threads=2)
    assert list(man.stages) == list(STAGES)
    assert man.complete and man.verify()
    assert not any(r.cached for r in man.stages.values())
    again = run_pipeline(s)
    assert all(r.cached for r in again.stages.values())
    assert {n: r.digest for n, r in again.stages.items()} == {n: r.digest for n, r in man.stages.items()}


@pytest.mark.parametrize("name", ["AL2", "AL2_V0", "NR12"])
def test_cached_and_fresh_outputs_identical(name):
    s = load_scenario(name)
    first = run_pipeline(s)
    fresh = run_pipeline(s, use_cache=False)
    assert {n: r.digest for n, r in first.stages.items()} == {n: r.digest for n, r in fresh.stages.items()}


def test_emit_is_byte_stable(tmp_path):
    man = run_pipeline(load_scenario("AL2"), ["gap", "control", "resolvent"])
    d1 = emit(man, tmp_path / "a")
    d2 = emit(run_pipeline(load_scenario("AL2"), ["gap", "control", "resolvent"]), tmp_path / "b")
    assert d1 == d2
    for f in d1:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_spectrum_csv_rows_match_eigenvalue_counts(tmp_path):
    man = run_pipeline(load_scenario("AL2"), ["spectra"])
    emit(man, tmp_path)
    with open(tmp_path / "spectrum.csv") as fh:
        rows = list(csv.DictReader(fh))
    for rec in man.outputs["spectra"]["records"]:
        n = sum(1 for r in rows if float(r["hbar"]) == rec["hbar"])
        assert n == len(rec["re"])
    assert rows[0]["re_lambda"].count("e") == 1  # %.12e


def test_json_format(tmp_path):
    man = run_pipeline(load_scenario("AL2_V0"), ["control"])
    emit(man, tmp_path, "json")
    recs = json.loads((tmp_path / "control.json").read_text())
    assert recs and set(recs[0]) == {"scenario_hash", "point_index", "T1_local", "integral_value",
                                     "invariance_flag"}


def test_stage_error_skips_downstream():
    r = raw()
    r["omega"] = [1.0, 1.0]
    man = run_pipeline(scenario_from_dict(r))
    assert man.stages["averaging"].status == "ok"
    assert man.stages["symbols"].status == "error"
    later = STAGES[STAGES.index("symbols") + 1:]
    assert all(man.stages[n].status == "skipped" for n in later)
    assert not man.complete and man.verify()


def test_dumps_json_format():
    text = dumps_json({"b": 1.5, "a": [float("inf"), True, None, "x"]})
    assert text.index('"a"') < text.index('"b"')
    assert "1.500000000000e+00" in text and "null" in text


def test_scenario_file_documented_schema_example(tmp_path):
    doc = yaml.safe_load(load_scenario("NR12").to_yaml())
    assert doc["omega"] == ["1", "2"]

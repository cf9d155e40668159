import json

import pytest

from osclab.lab.cli import main


@pytest.fixture(autouse=True)
def cache(tmp_path, monkeypatch):
    monkeypatch.setenv("LAB_CACHE_DIR", str(tmp_path / "cache"))


def summary(capsys):
    return json.loads(capsys.readouterr().out)


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out.split()
    assert out[0::2] == ["AL2", "AL2_V0", "NR12"]
    assert all(len(h) == 16 for h in out[1::2])


def test_run_writes_tables(tmp_path, capsys):
    assert main(["run", "--scenario", "AL2_V0", "--out", str(tmp_path / "o")]) == 0
    s = summary(capsys)
    assert s["control"]["invariance_flag"] is True
    for f in ("spectrum.csv", "control.csv", "normalform.csv", "resolvent.csv", "summary.json", "manifest.json"):
        assert (tmp_path / "o" / f).exists()


def test_sweep_with_overrides(tmp_path, capsys):
    code = main(["sweep", "--scenario", "AL2", "--hbar", "0.1,0.05", "--delta-rule", "hbar_3_2",
                 "--window", "0.3", "--out", str(tmp_path), "--threads", "2", "--no-cache"])
    assert code == 0
    s = summary(capsys)
    assert [r["hbar"] for r in s["gap_table"]] == [0.1, 0.05]
    assert s["gap_table"][1]["delta"] == pytest.approx(0.05 ** 1.5)


def test_check_control(tmp_path, capsys):
    assert main(["check-control", "--scenario", "AL2", "--out", str(tmp_path)]) == 0
    s = summary(capsys)
    assert s["control"]["satisfied"] is True and s["control"]["strong_holds"] is False


def test_resolvent_scan_verb(tmp_path, capsys):
    assert main(["resolvent-scan", "--scenario", "AL2", "--hbar", "0.1", "--out", str(tmp_path),
                 "--format", "json"]) == 0
    s = summary(capsys)
    assert s["resolvent"]["eps"] > 0
    assert (tmp_path / "resolvent.json").exists()


def test_resolvent_scan_hits_uncoupled_spectrum(tmp_path, capsys):
    # without coupling the eigenvalue 1 + i hbar^2/2 lies on the scanned segment
    assert main(["resolvent-scan", "--scenario", "AL2_V0", "--hbar", "0.1", "--out", str(tmp_path)]) == 0
    assert summary(capsys)["resolvent"]["eps"] == 0.0


def test_egorov_verify(capsys):
    assert main(["egorov-verify", "--hbar", "0.1"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert all(i["decreasing"] for i in res["instances"])


def test_scenario_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: bad\nomega: [1, 1]\nA: [{alpha: [1, 0], beta: [0, 0], im: 1}]\nV: []\n")
    assert main(["run", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    assert "A: symbol is not real-valued" in capsys.readouterr().err
    assert main(["run", "--scenario", "AL2", "--hbar", "0.05,0.1"]) == 2


def test_numeric_failure_exit_code(tmp_path, capsys):
    f = tmp_path / "approx.yaml"
    f.write_text("name: approx\nomega: [1.0, 1.0]\nA: [{alpha: [1, 0], beta: [1, 0], re: 1}]\nV: []\n")
    assert main(["run", "--scenario", str(f), "--out", str(tmp_path / "o")]) == 3
    assert "stage symbols failed" in capsys.readouterr().err

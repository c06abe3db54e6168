import json

import pytest

from shapattr.case_study import bundled_path
from shapattr.cli import main

CUBE = str(bundled_path("cube.json"))
DIABETES = str(bundled_path("diabetes.csv"))
DIABETES_MODEL = str(bundled_path("diabetes_linear.json"))


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_attribute_ig(capsys):
    code, out, _ = run(capsys, "attribute", "--method", "ig", "--model", CUBE, "--baseline", "zeros", "--explicand", "5,1")
    assert code == 0
    scores = json.loads(out)["scores"]
    assert scores["x1"] == pytest.approx(180, abs=1e-3) and scores["x2"] == pytest.approx(36, abs=1e-3)


def test_attribute_bshap_text_to_file(capsys, tmp_path):
    target = tmp_path / "a.txt"
    code, _, _ = run(capsys, "attribute", "--method", "bshap", "--model", CUBE, "--baseline", "0,0", "--explicand", '{"x1": 5, "x2": 1}', "--format", "text", "--out", str(target))
    assert code == 0
    assert "170" in target.read_text()


def test_attribute_input_errors(capsys):
    assert run(capsys, "attribute", "--method", "bshap", "--model", "/no/such.json", "--explicand", "1,1", "--baseline", "zeros")[0] == 2
    assert run(capsys, "attribute", "--method", "bshap", "--model", CUBE, "--explicand", "1", "--baseline", "zeros")[0] == 2
    assert run(capsys, "attribute", "--method", "lime")[0] == 2


def test_cohort_writes_reports(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("SHAPATTR_OUT", str(tmp_path / "env"))
    code, _, _ = run(capsys, "cohort", "--model", DIABETES_MODEL, "--data", DIABETES, "--method", "bshap,ces_0.2", "--count", "3", "--format", "csv")
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "env").iterdir()) == ["bshap.csv", "ces_0.2.csv"]
    code, _, _ = run(capsys, "cohort", "--model", DIABETES_MODEL, "--data", DIABETES, "--method", "bshap", "--explicands", "0,5", "--out", str(tmp_path / "x"))
    assert code == 0 and len(list((tmp_path / "x").iterdir())) == 3


def test_scenario_commands(capsys):
    code, out, _ = run(capsys, "scenario", "cube-remark", "--format", "json")
    assert code == 0 and json.loads(out)[0]["passed"]
    code, _, err = run(capsys, "scenario", "nonexistent")
    assert code == 2 and "cube-remark" in err


def test_scenario_failure_exit_code(capsys, tmp_path):
    golden = json.loads(bundled_path("golden.json").read_text())
    golden["scenarios"]["cube-remark"]["ig.x1"]["value"] = 0.0
    path = tmp_path / "g.json"
    path.write_text(json.dumps(golden))
    assert run(capsys, "scenario", "cube-remark", "--golden", str(path))[0] == 1


def test_check_command(capsys, tmp_path):
    inst = {
        "explicand": {"x": 5.0, "y": 5.0},
        "distribution": {"type": "explicit", "rows": [{"values": {"x": x, "y": y}, "prob": 0.25} for x in (1.0, 5.0) for y in (0.0, 5.0)]},
        "model": {"type": "expression", "expr": "y^2", "features": ["x", "y"]},
        "feature": "x",
    }
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(inst))
    code, out, _ = run(capsys, "check", "dummy", "--method", "ces", "--instance", str(path))
    assert code == 0 and json.loads(out)["verdict"] == "pass"
    inst["distribution"]["rows"] = [{"values": {"x": 5.0, "y": 5.0}, "prob": 0.5}, {"values": {"x": 1.0, "y": 0.0}, "prob": 0.5}]
    path.write_text(json.dumps(inst))
    code, out, _ = run(capsys, "check", "dummy", "--method", "ces", "--instance", str(path))
    assert code == 1 and json.loads(out)["verdict"] == "fail"
    assert run(capsys, "check", "dummy", "--method", "ces")[0] == 2


def test_oracle_verify_only(capsys):
    code, out, _ = run(capsys, "oracle", "--verify-only")
    assert code == 0 and "derived values agree" in out


def test_usage_errors(capsys):
    assert run(capsys)[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "--help")[0] == 0

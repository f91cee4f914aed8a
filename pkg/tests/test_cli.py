import json

import numpy as np
import pytest

from robustlogic.booster import BoostConfig, train_booster
from robustlogic.cli import main
from robustlogic.model import Atom, Clause, FeatureSchema, LogicEnsemble, load_model, save_model
from robustlogic.properties import Monotonicity
from robustlogic.verifier import verify


def records(out):
    return [json.loads(line) for line in out.strip().splitlines()]


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def tiny_model(tmp_path, r, name="m.json"):
    sch = FeatureSchema.simple(1, "continuous", 0, 10)
    p = tmp_path / name
    save_model(LogicEnsemble(sch, (Clause((Atom(1.0, 0, 5.0),), r),)), p)
    return str(p)


MONO = [{"type": "monotonicity", "features": ["x0"], "direction": "increasing"}]


def test_verify_exit_codes(tmp_path, capsys):
    props = write_json(tmp_path / "p.json", MONO)
    assert main(["verify", "--model", tiny_model(tmp_path, -1.0), "--properties", props]) == 0
    assert records(capsys.readouterr().out)[0]["verdict"] == "verified"
    assert main(["verify", "--model", tiny_model(tmp_path, 1.0), "--properties", props]) == 2
    rec = records(capsys.readouterr().out)[0]
    assert rec["verdict"] == "counterexample" and rec["x"][0] < 5 <= rec["x_prime"][0]


def test_verify_timeout_gives_unknown(tmp_path, capsys):
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 10, (400, 4))
    y = rng.integers(0, 2, 400)
    sch = FeatureSchema.simple(4, "continuous", 0, 10)
    save_model(train_booster(X, y, sch, BoostConfig(rounds=4, max_depth=6)), tmp_path / "big.json")
    props = write_json(tmp_path / "p.json", MONO)
    code = main(["verify", "--model", str(tmp_path / "big.json"), "--properties", props,
                 "--timeout", "0.000001", "--backend", "native"])
    assert code == 3
    assert records(capsys.readouterr().out)[0]["reason"] == "timeout"


def test_timeout_env_variable(tmp_path, monkeypatch, capsys):
    props = write_json(tmp_path / "p.json", MONO)
    monkeypatch.setenv("ROBUSTLOGIC_TIMEOUT", "abc")
    assert main(["verify", "--model", tiny_model(tmp_path, -1.0), "--properties", props]) == 1
    monkeypatch.setenv("ROBUSTLOGIC_TIMEOUT", "5")
    assert main(["verify", "--model", tiny_model(tmp_path, -1.0), "--properties", props]) == 0


def test_attack(tmp_path, capsys):
    pos = tiny_model(tmp_path, 1.0, "pos.json")
    c = write_json(tmp_path / "c.json", {"box": {"x0": [0, 10]}})
    assert main(["attack", "--model", pos, "--constraints", c]) == 0
    assert records(capsys.readouterr().out) == [{"result": "none"}]
    sch = FeatureSchema.simple(1, "continuous", 0, 10)
    two = LogicEnsemble(sch, (Clause((Atom(1.0, 0, 5.0),), -1.0), Clause((Atom(-1.0, 0, -5.0),), 1.0)))
    save_model(two, tmp_path / "two.json")
    assert main(["attack", "--model", str(tmp_path / "two.json"), "--constraints", c]) == 0
    rec = records(capsys.readouterr().out)[0]
    assert rec["result"] == "instance" and rec["x"]["x0"] < 5
    bad = tmp_path / "bad.json"
    bad.write_text("{oops")
    assert main(["attack", "--model", pos, "--constraints", str(bad)]) == 1


def test_eval(tmp_path, capsys):
    m = tiny_model(tmp_path, -1.0)
    (tmp_path / "d.csv").write_text("x0,label\n1,0\n7,1\n")
    assert main(["eval", "--model", m, "--data", str(tmp_path / "d.csv")]) == 0
    rec = records(capsys.readouterr().out)[0]
    assert rec["accuracy"] == 1.0 and rec["auc"] == 1.0
    (tmp_path / "one.csv").write_text("x0,label\n7,1\n8,1\n")
    assert main(["eval", "--model", m, "--data", str(tmp_path / "one.csv")]) == 0
    assert "auc" not in records(capsys.readouterr().out)[0]
    (tmp_path / "e.csv").write_text("x0,label\n")
    assert main(["eval", "--model", m, "--data", str(tmp_path / "e.csv")]) == 1


def test_train_usage_errors(tmp_path):
    assert main(["synth", "--out-dir", str(tmp_path), "--rows", "50"]) == 0
    base = ["train", "--data", str(tmp_path / "data.csv"), "--out", str(tmp_path / "m.json")]
    assert main(base + ["--schema", str(tmp_path / "missing.json")]) == 1
    assert main(base + ["--schema", str(tmp_path / "schema.json"), "--rounds", "0"]) == 1
    assert main(["frobnicate"]) == 1


def test_train_end_to_end_and_deterministic(tmp_path, capsys):
    assert main(["synth", "--out-dir", str(tmp_path), "--rows", "400", "--seed", "3"]) == 0
    args = ["train", "--data", str(tmp_path / "data.csv"), "--schema", str(tmp_path / "schema.json"),
            "--properties", str(tmp_path / "properties.json"), "--rounds", "2", "--max-depth", "3"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    recs = records(capsys.readouterr().out)
    assert [r for r in recs if r.get("event") == "verdict"][0]["verdict"] == "verified"
    assert recs[-1]["event"] == "done"
    m = load_model(tmp_path / "a.json")
    assert verify(m, None, Monotonicity((0,))).verified
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_inspect(tmp_path, capsys):
    assert main(["inspect", "--model", tiny_model(tmp_path, 0.5), "--clauses"]) == 0
    head, clause = records(capsys.readouterr().out)
    assert head["clauses"] == 1 and head["predicates"] == {"x0": [5.0]}
    assert clause["body"] == "1*x0 < 5"

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tieq.catalog import example_ct, random_exponential_dt
from tieq.cli import bundled_example_path, main
from tieq.io import load_model, model_to_dict, save_model


def write_config(path, **cfg):
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def run(args, capsys=None):
    code = main(args)
    err = capsys.readouterr().err if capsys is not None else ""
    return code, err


def test_anneal_example(tmp_path):
    cfg = write_config(tmp_path / "c.json", model="builtin:example", mode="ct")
    out = tmp_path / "out"
    assert main(["anneal", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["certificate"]["passed"] is True
    assert report["exitStatus"] == 0
    assert (out / "series" / "anneal.csv").exists()
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["command"] == "anneal"


def test_reports_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", model="builtin:example")
    for name in ("a", "b"):
        assert main(["anneal", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    for csv_name in ("anneal.csv", "residual.csv"):
        a = (tmp_path / "a" / "series" / csv_name).read_bytes()
        assert a == (tmp_path / "b" / "series" / csv_name).read_bytes()


def test_scan_example_is_empty(tmp_path):
    cfg = write_config(tmp_path / "c.json", model="builtin:example")
    assert main(["scan", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["standard_equilibria"] == []
    assert report["candidates"] == 33 ** 2


def test_missing_states_is_reported_with_pointer(tmp_path, capsys):
    doc = model_to_dict(random_exponential_dt(0))
    del doc["states"]
    (tmp_path / "m.json").write_text(json.dumps(doc))
    cfg = write_config(tmp_path / "c.json", model="m.json")
    code, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    payload = json.loads(err)
    assert payload["pointer"] == "/states"
    assert "states" in payload["error"]


def test_bad_config_value_pointer(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", model="builtin:example", schedule={"factor": 2.0})
    code, err = run(["anneal", "--config", str(cfg)], capsys)
    assert code == 1
    assert json.loads(err)["pointer"].startswith("/schedule")


def test_unknown_builtin(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", model="builtin:nope")
    code, err = run(["scan", "--config", str(cfg)], capsys)
    assert code == 1 and json.loads(err)["pointer"] == "/model"


def test_model_file_round_trip(tmp_path):
    for model in (example_ct(9), random_exponential_dt(3)):
        path = tmp_path / f"{model.name}.json"
        save_model(model, path)
        again = load_model(path)
        assert again == model
        np.testing.assert_array_equal(again.kernel, model.kernel)


def test_bundled_example_matches_builtin():
    assert load_model(bundled_example_path()) == example_ct()


def test_solve_writes_seventeen_digit_csv(tmp_path):
    cfg = write_config(tmp_path / "c.json", model="builtin:example", **{"lambda": 0.1})
    out = tmp_path / "o"
    assert main(["solve", "--config", str(cfg), "--out", str(out)]) == 0
    with open(out / "series" / "residual.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["start", "iteration", "residual"]
    first = rows[1][2]
    assert float(first) == float(format(float(first), ".17g"))
    assert len(first.replace(".", "").replace("-", "").split("e")[0].lstrip("0")) >= 15
    report = json.loads((out / "report.json").read_text())
    assert report["fixedPoint"]["converged"] is True


def test_solve_requires_lambda(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", model="builtin:example")
    code, err = run(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and json.loads(err)["pointer"] == "/lambda"


def test_bridge_command(tmp_path):
    cfg = write_config(tmp_path / "c.json", model="builtin:example", bridge={"h_list": [0.2, 0.1]},
                       **{"lambda": 0.1})
    out = tmp_path / "o"
    assert main(["bridge", "--config", str(cfg), "--out", str(out)]) == 0
    with open(out / "series" / "bridge.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["h", "discrepancy", "policy_distance"] and len(rows) == 3


def test_bridge_inadmissible_step(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", model="builtin:example", bridge={"h_list": [0.5, 3.0]},
                       **{"lambda": 0.1})
    code, err = run(["bridge", "--config", str(cfg), "--out", str(tmp_path / "o")], capsys)
    assert code == 1 and "StepTooLarge" in json.loads(err)["error"]


def test_verify_exponential_model(tmp_path):
    path = tmp_path / "m.json"
    save_model(random_exponential_dt(1, states=2), path)
    cfg = write_config(tmp_path / "c.json", model="m.json", schedule={"lambda_min": 1e-5})
    out = tmp_path / "o"
    assert main(["verify", "--config", str(cfg), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["checks"] == {"certificate": True, "bellman": True}


def test_mode_mismatch_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", model="builtin:example", mode="dt")
    code, err = run(["scan", "--config", str(cfg)], capsys)
    assert code == 1 and json.loads(err)["pointer"] == "/mode"


def test_example_subcommand(tmp_path):
    path = tmp_path / "e.json"
    assert main(["example", "entropy_only", "--out", str(path)]) == 0
    assert load_model(path).name == "entropy_only"


def test_console_script_with_threads(tmp_path):
    cfg = write_config(tmp_path / "c.json", model="builtin:example", bridge={"h_list": [0.2, 0.1]},
                       **{"lambda": 0.2})
    outs = []
    for threads in ("1", "2"):
        out = tmp_path / threads
        proc = subprocess.run([sys.executable, "-m", "tieq.cli", "bridge", "--config", str(cfg), "--out", str(out)],
                              env={"TIEQ_THREADS": threads, "PATH": ""}, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append((out / "report.json").read_bytes())
    assert outs[0] == outs[1]


def test_help_lists_commands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for cmd in ("solve", "anneal", "bridge", "verify", "scan"):
        assert cmd in text

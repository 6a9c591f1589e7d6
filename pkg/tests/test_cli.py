import csv
import io
import json
import math
from pathlib import Path

import pytest

from spongedim.cli import run

MODELS = Path(__file__).resolve().parent.parent / "models"


def _run(capsys, *argv):
    code = run([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_dim_json_mcmullen(capsys):
    code, out, _ = _run(capsys, "dim", "--model", MODELS / "mcmullen.json", "--json")
    assert code == 0
    rec = json.loads(out)
    want = math.log2(2 ** (math.log(2) / math.log(3)) + 1)
    assert rec["value"] == pytest.approx(want, abs=1e-12)
    assert rec["selector"]["i0"] == 2


def test_table_output(capsys):
    code, out, _ = _run(capsys, "boxdim", "--model", MODELS / "mcmullen.json")
    assert code == 0 and out.startswith("kind")
    assert "equal_to_hausdorff" in out


def test_usage_errors(capsys):
    assert _run(capsys, "frobnicate", "--model", MODELS / "gl_half.json")[0] == 1
    assert _run(capsys, "dim")[0] == 1
    code, _, err = _run(capsys, "project", "--model", MODELS / "gl_half.json")
    assert code == 1 and "--level" in err


def test_missing_model_file(capsys, tmp_path):
    code, _, err = _run(capsys, "dim", "--model", tmp_path / "absent.json")
    assert code == 2 and "absent.json" in err


def test_invalid_model_field(capsys, tmp_path):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"schema": 1, "bases": [3, 2], "cells": {"kind": "independent", "p": {}}, "x": 1}))
    code, _, err = _run(capsys, "dim", "--model", f)
    assert code == 2 and "m.json" in err and "unknown keys" in err


def test_contract_violation_exit_code(capsys, tmp_path):
    f = tmp_path / "m.json"
    doc = {
        "schema": 1,
        "bases": [2, 2],
        "cells": {"kind": "mixture", "atoms": [{"subset": ["0,0", "1,1"], "prob": 1.0}]},
        "law": {"kind": "custom", "v": {"0,0": 1.0}},
    }
    f.write_text(json.dumps(doc))
    assert _run(capsys, "measure", "--model", f)[0] == 3


def test_verify_lines(capsys):
    code, out, _ = _run(capsys, "verify", "--model", MODELS / "gl_asym.json")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) >= 8 and all(line.startswith("PASS") for line in lines)


def test_witness_round_trip(capsys, tmp_path):
    model = MODELS / "gl_asym.json"
    _, out, _ = _run(capsys, "dim", "--model", model, "--json")
    rec = json.loads(out)
    law = tmp_path / "law.json"
    law.write_text(json.dumps(rec["witness"]))
    code, out, _ = _run(capsys, "measure", "--model", model, "--law", law, "--json")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(rec["value"], abs=1e-10)


def test_pressure_command(capsys):
    code, out, _ = _run(capsys, "pressure", "--model", MODELS / "gl_half.json", "--level", 2, "--theta", 1, "--json")
    assert code == 0
    # P_2(1) = B_2 log E#A with B_2 = 1 / log 2
    assert json.loads(out)["value"] == pytest.approx(math.log2(3), abs=1e-12)


def test_oracle_command(capsys):
    code, out, _ = _run(capsys, "oracle", "--model", MODELS / "gl_asym.json", "--what", "mgamma", "--json")
    assert code == 0
    assert json.loads(out)["abs_error"] <= 5e-3


def test_simulate_csv_and_seed(capsys, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        argv = ["simulate", "--mode", "box", "--model", MODELS / "gl_half.json"]
        code, _, _ = _run(capsys, *argv, "--depth", 5, "--replicates", 4, "--seed", 9, "--out", path)
        assert code == 0
        outs.append(path.read_text())
    assert outs[0] == outs[1]
    rows = list(csv.reader(io.StringIO(outs[0])))
    assert rows[0] == ["replicate", "n", "statistic", "value"]
    assert len(rows) == 1 + 4 * 3
    other = tmp_path / "c.csv"
    argv = ["simulate", "--mode", "box", "--model", MODELS / "gl_half.json"]
    _run(capsys, *argv, "--depth", 5, "--replicates", 4, "--seed", 10, "--out", other)
    assert other.read_text() != outs[0]


def test_simulate_survival_json(capsys):
    argv = ["simulate", "--mode", "survival", "--model", MODELS / "percolation.json"]
    code, out, _ = _run(capsys, *argv, "--depth", 6, "--replicates", 50, "--json")
    assert code == 0
    rec = json.loads(out)
    assert 0 <= rec["frequency"] <= 1 and "theory" in rec

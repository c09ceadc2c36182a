import csv
import io
import json

import numpy as np
import pytest

from hfbm.cli import main
from hfbm.process import load_path


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_sample_and_integrate(tmp_path, capsys):
    f = tmp_path / "x.bin"
    code, out, _ = run(capsys, "sample", "--d", "2", "--H", "0.7", "--fine-level", "6", "--seed", "3", "--out", str(f))
    assert code == 0 and json.loads(out)["d"] == 2
    X = load_path(f)
    assert X.dim == 2 and X.grid.level == 6 and X.seed == 3
    code, out, _ = run(capsys, "integrate", "--path", str(f), "--P", "0,1", "--Q", "1", "--coarse-level", "4")
    rep = json.loads(out)
    assert code == 0 and rep["levels"][0] == 0 and len(rep["value"]["real"]) == 2


def test_integrate_ito(capsys):
    code, out, _ = run(capsys, "integrate", "--mode", "ito", "--H", "0.5", "--P", "1", "--d", "2", "--fine-level", "5", "--coarse-level", "5")
    assert code == 0
    M = np.array(json.loads(out)["value"]["real"])
    assert M.shape == (2, 2)


def test_moment_exact(capsys):
    code, out, _ = run(capsys, "moment-exact", "--word", "1,1,1,1", "--d", "2,4")
    vals = {v["d"]: v["value"] for v in json.loads(out)["values"]}
    assert vals == {"2": 2.25, "4": 2.0625, "inf": 2.0}
    code, _, err = run(capsys, "moment-exact", "--d", "2")
    assert code == 2 and "word" in err


def test_moment_mc_to_file(tmp_path, capsys):
    f = tmp_path / "m.json"
    code, _, _ = run(capsys, "moment-mc", "--word", "1,1", "--d", "2", "--n-paths", "500", "--out", str(f))
    rep = json.loads(f.read_text())
    assert code == 0 and {r["statistic"] for r in rep["rows"]} == {"mc", "exact"}


def test_sweep_config_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mode": "monomial", "word": [1, 1, 1, 1], "d_list": [2, 4], "n_paths": 1}))
    code, out, _ = run(capsys, "sweep", "--config", str(cfg), "--d", "2,4,8")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and [r["d"] for r in rows] == ["2", "4", "8", "inf", "all"]
    cfg.write_text(json.dumps({"mode": "monomial", "bogus": 1}))
    code, _, err = run(capsys, "sweep", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_ito_strato_csv(capsys, monkeypatch):
    monkeypatch.setenv("HFBM_THREADS", "2")
    code, out, _ = run(capsys, "ito-strato", "--P", "0,1", "--d", "2", "--n-paths", "2", "--levels", "6,8")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 2
    assert float(rows[0]["value"]) > 0


def test_bad_mode_rejected(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--mode", "nope"])
    code, _, err = run(capsys, "sweep", "--mode", "young", "--H", "0.4")
    assert code == 2 and "H" in err

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from topheavy import contest_sim, gaussian_model, hockey, projections, synthetic
from topheavy.cli import main

DATA = Path(__file__).resolve().parents[1] / "data"


def test_optimize_sample_slate(tmp_path):
    out, man = tmp_path / "lu.csv", tmp_path / "m.json"
    rc = main(["optimize", "--slate", str(DATA / "hockey_slate.csv"), "--stacking", "type4",
               "--gamma", "7", "-M", "10", "--out", str(out), "--manifest", str(man)])
    assert rc == 0
    doc = json.loads(man.read_text())
    assert doc["produced"] == 10
    ov = np.array(doc["overlap"])
    assert np.all(np.diag(ov) == 9)
    assert ov[~np.eye(10, dtype=bool)].max() <= 7
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["C", "C", "W", "W", "W", "D", "D", "G", "UTIL"] and len(rows) == 11
    # the written file passes the validate subcommand
    rc = main(["validate", "--slate", str(DATA / "hockey_slate.csv"), "--lineups", str(out),
               "--stacking", "type4", "--gamma", "7"])
    assert rc == 0


def test_optimize_partial_output(tmp_path, capsys):
    slate = tmp_path / "small.csv"
    with open(slate, "w", newline="") as fh:
        hockey.write_slate(synthetic.hockey_slate(2, seed=0), fh)
    man = tmp_path / "m.json"
    rc = main(["optimize", "--slate", str(slate), "--stacking", "none", "--gamma", "0", "-M", "6",
               "--out", str(tmp_path / "lu.csv"), "--manifest", str(man)])
    assert rc == 0
    doc = json.loads(man.read_text())
    # four goalies, so at most four disjoint lineups
    assert 1 <= doc["produced"] <= 4 and doc["notes"]


def test_missing_slate(tmp_path, capsys):
    rc = main(["optimize", "--slate", str(tmp_path / "nope.csv")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err
    assert main(["optimize"]) == 2


def test_fit_and_predict_match_library(tmp_path):
    model = tmp_path / "model.json"
    assert main(["fit", "--training", str(DATA / "training.csv"), "--positions", "C,W,D",
                 "--out", str(model)]) == 0
    recs = [r for r in projections.read_records(DATA / "training.csv") if r.position != "G"]
    lib = projections.LinearProjection().fit_records(recs)
    doc = json.loads(model.read_text())
    assert doc["intercept"] == lib.intercept_ and doc["coef"] == list(lib.coef_)

    out = tmp_path / "proj.csv"
    assert main(["predict", "--records", str(DATA / "hockey_forecasts.csv"),
                 "--slate", str(DATA / "hockey_slate.csv"), "--skater-model", str(model),
                 "--out", str(out)]) == 0
    pred = projections.project(projections.read_records(DATA / "hockey_forecasts.csv"),
                               projections.LinearProjection.from_json(str(model)),
                               projections.default_model("goalie-default"))
    rows = list(csv.DictReader(out.open()))
    assert all(float(r["proj_mean"]) == round(pred[r["player_id"]], 6) for r in rows)
    # the augmented slate still loads
    assert len(hockey.read_slate(out)) == len(rows)


def test_simulate_deterministic(tmp_path):
    slate = tmp_path / "s.csv"
    with open(slate, "w", newline="") as fh:
        hockey.write_slate(synthetic.hockey_slate(3, seed=4), fh)
    args = ["simulate", "--slate", str(slate), "--strategies", "none,type4", "-M", "3",
            "--draws", "400", "--population", "50", "--seed", "5"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(args + ["--out-json", str(a), "--out-csv", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out-json", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert set(doc["strategies"]) == {"none", "type4"}
    assert "p_beat_field_max_ci95" in doc["strategies"]["type4"]
    assert main(args[:-2] + ["--draws", "0"]) == 2


def test_bounds(tmp_path):
    out, pairs = tmp_path / "b.csv", tmp_path / "p.csv"
    assert main(["bounds", "--out", str(out), "--pairs-out", str(pairs)]) == 0
    rows = list(csv.DictReader(out.open()))
    ref = gaussian_model.bounds_table([0.1, 0.5, 1, 2, 3, 5])
    for r, b in zip(rows, ref):
        assert (float(r["lower"]), float(r["exact"]), float(r["upper"])) == (b.lower, b.exact, b.upper)
    z2 = rows[3]
    assert abs(float(z2["lower"]) - 0.02160) < 1e-5 and abs(float(z2["upper"]) - 0.02700) < 1e-5
    prow = list(csv.DictReader(pairs.open()))
    assert len(prow) == 24 and all(float(r["chernoff"]) >= float(r["exact"]) for r in prow)
    assert main(["bounds", "--z", "", "--out", str(out)]) == 2


def test_config_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"z": "2", "out": str(tmp_path / "x.csv")}))
    assert main(["bounds", "--config", str(cfg)]) == 0
    assert len((tmp_path / "x.csv").read_text().splitlines()) == 2
    assert main(["bounds", "--config", str(cfg), "--z", "1,2"]) == 0
    assert len((tmp_path / "x.csv").read_text().splitlines()) == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["bounds", "--config", str(cfg)]) == 2


def test_validate_reports_violations(tmp_path, capsys):
    s = synthetic.hockey_slate(2, seed=0)
    ids = [p.player_id for p in s.players]
    lu = tmp_path / "bad.csv"
    lu.write_text("C,C,W,W,W,D,D,G,UTIL\n" + ",".join(ids[:9]) + "\n")
    sp = tmp_path / "s.csv"
    with open(sp, "w", newline="") as fh:
        hockey.write_slate(s, fh)
    assert main(["validate", "--slate", str(sp), "--lineups", str(lu)]) == 1
    assert "0/1 lineups valid" in capsys.readouterr().out


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "topheavy", "bounds", "--z", "2", "--out", "/dev/null"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "wrote 1 rows" in r.stdout

import json

import numpy as np
import pytest

from choicedesign.cli import main

from published import ICONS_PI


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def test_optimize_uniform(workdir):
    prob = write(workdir / "p.json", {"m": 6, "k": 3, "pi": [1] * 6})
    assert main(["optimize", "--input", prob, "--output", "r.json"]) == 0
    r = json.loads((workdir / "r.json").read_text())
    assert r["certificate"]["optimal"] and abs(r["duality_gap"]) <= 1e-12
    np.testing.assert_allclose(r["design"]["weights"], 1 / 20, atol=1e-10)
    assert len(r["dual"]["gamma"]) == 6


def test_optimize_is_byte_reproducible(workdir):
    prob = write(workdir / "p.json", {"m": 6, "k": 4, "pi": list(ICONS_PI)})
    main(["optimize", "--input", prob, "--output", "a.json"])
    main(["optimize", "--input", prob, "--output", "b.json"])
    assert (workdir / "a.json").read_bytes() == (workdir / "b.json").read_bytes()


def test_optimize_invalid_input(workdir):
    bad = write(workdir / "bad.json", {"m": 3, "k": 2, "pi": [1, 2]})
    assert main(["optimize", "--input", bad]) == 2
    (workdir / "broken.json").write_text("{not json")
    assert main(["optimize", "--input", "broken.json"]) == 2
    assert main(["optimize", "--input", "missing.json"]) == 2


def test_optimize_non_convergence_still_writes_report(workdir):
    prob = write(workdir / "p.json", {"m": 6, "k": 3, "pi": [1, 4, 9, 16, 25, 36]})
    cfg = write(workdir / "c.json", {"tolerances": {"max_iter_dual": 1}})
    assert main(["optimize", "--input", prob, "--config", cfg, "--output", "r.json"]) == 3
    r = json.loads((workdir / "r.json").read_text())
    assert r["status"] == "not certified"


def test_efficiency_and_certify(workdir, capsys):
    prob = write(workdir / "p.json", {"m": 4, "k": 2, "pi": [1, 2, 3, 4]})
    uni = write(workdir / "uni.json", {"m": 4, "k": 2, "weights": [1 / 6] * 6})
    disc = write(workdir / "disc.json", {"m": 4, "k": 2, "weights": [0.5, 0, 0, 0, 0, 0.5]})
    assert main(["efficiency", "--input", prob, "--design", uni, "--design", disc]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "design,efficiency"
    assert 0 < float(out[1].split(",")[1]) < 1
    assert out[2] == "disc,0"
    assert main(["certify", "--input", prob, "--design", uni, "--output", "c.json"]) == 3
    assert json.loads((workdir / "c.json").read_text())["optimal"] is False


def test_optimize_then_certify(workdir):
    prob = write(workdir / "p.json", {"m": 5, "k": 3, "pi": [1, 2, 3, 4, 5]})
    main(["optimize", "--input", prob, "--output", "r.json"])
    design = json.loads((workdir / "r.json").read_text())["design"]
    d = write(workdir / "d.json", design)
    assert main(["certify", "--input", prob, "--design", d]) == 0


def test_round(workdir):
    d = write(workdir / "d.json", {"m": 6, "k": 3, "weights": [1 / 20] * 20})
    prob = write(workdir / "p.json", {"m": 6, "k": 3, "pi": [1] * 6})
    assert main(["round", "--input", d, "--n", "20", "--problem", prob, "--output", "o.json"]) == 0
    out = json.loads((workdir / "o.json").read_text())
    assert out["counts"] == [1] * 20 and out["efficiency_vs_unrounded"] == pytest.approx(1.0)


def test_fit(workdir):
    (workdir / "c.csv").write_text("set_members,counts\n1|2,3|1\n")
    assert main(["fit", "--input", "c.csv", "--output", "o.json"]) == 0
    np.testing.assert_allclose(json.loads((workdir / "o.json").read_text())["pi"], [0.75, 0.25])
    (workdir / "d.csv").write_text("set_members,counts\n1|2,3|0\n")
    assert main(["fit", "--input", "d.csv"]) == 2


def test_simulate_and_effline(workdir):
    assert main(["simulate", "--sigma", "1", "--replicates", "3", "--seed", "5", "--output", "a.csv"]) == 0
    cfg = write(workdir / "s.json", {"simulation": {"sigma": 1, "replicates": 3, "seed": 5}})
    assert main(["simulate", "--config", cfg, "--output", "b.csv"]) == 0
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
    assert main(["effline", "--points", "2", "--output", "e.csv"]) == 0
    assert len((workdir / "e.csv").read_text().splitlines()) == 3


def test_unknown_config_field(workdir):
    prob = write(workdir / "p.json", {"m": 3, "k": 2, "pi": [1, 2, 3]})
    cfg = write(workdir / "c.json", {"tolerances": {"kkt": 1e-8, "nonsense": 1}})
    assert main(["optimize", "--input", prob, "--config", cfg]) == 2

import json

import pytest

from bundlechoice.cli import main
from bundlechoice.data import read_csv


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"de": {"max_generations": 10}}))
    return str(path)


def test_simulate_and_estimate(tmp_path, cfg, capsys):
    data = tmp_path / "d.csv"
    assert main(["simulate", "--design", "1", "--n", "80", "--seed", "3", "--out", str(data)]) == 0
    assert read_csv(str(data)).n == 80
    out = tmp_path / "r.json"
    assert main(["estimate", "--method", "mrc", "--data", str(data), "--config", cfg, "--out", str(out)]) == 0
    res = json.loads(out.read_text())
    assert res["names"] == ["beta_2", "gamma_2"]


def test_bootstrap_and_eta(tmp_path, cfg):
    data = tmp_path / "p.csv"
    main(["simulate", "--design", "3", "--n", "120", "--out", str(data)])
    out = tmp_path / "b.json"
    assert main(["bootstrap", "--method", "panel-ms", "--data", str(data), "--b", "3", "--config", cfg,
                 "--out", str(out)]) == 0
    assert len(json.loads(out.read_text())["ci"]) == 2
    eta = tmp_path / "e.json"
    assert main(["test-eta", "--method", "panel-ms", "--data", str(data), "--b", "9", "--config", cfg,
                 "--out", str(eta)]) == 0
    assert "conclusion" in json.loads(eta.read_text())
    assert main(["test-eta", "--method", "panel-ms", "--cross-fit", "--data", str(data), "--b", "9",
                 "--config", cfg, "--out", str(eta)]) == 0
    assert json.loads(eta.read_text())["cross_fit"] is True


def test_montecarlo_deterministic(tmp_path, cfg):
    outs = []
    for k in range(2):
        path = tmp_path / f"t{k}.csv"
        assert main(["montecarlo", "--design", "1", "--method", "mrc", "--n", "60", "80", "--reps", "2",
                     "--seed", "5", "--config", cfg, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].decode().splitlines()[0].startswith("N,beta_2 MBIAS")


def test_exit_codes(tmp_path, cfg):
    missing = str(tmp_path / "missing.csv")
    assert main(["estimate", "--method", "mrc", "--data", missing]) == 2
    cross = tmp_path / "c.csv"
    main(["simulate", "--design", "1", "--n", "30", "--out", str(cross)])
    assert main(["estimate", "--method", "panel-ms", "--data", str(cross)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["estimate", "--method", "mrc", "--data", str(cross), "--config", str(bad)]) == 2
    # identical choices for everyone: criterion identically zero
    flat = tmp_path / "flat.csv"
    lines = cross.read_text().splitlines()
    head = lines[0].split(",")
    i1, i2 = head.index("d1"), head.index("d2")
    rows = []
    for line in lines[1:]:
        v = line.split(",")
        v[i1], v[i2] = "1", "1"
        rows.append(",".join(v))
    flat.write_text("\n".join([lines[0]] + rows) + "\n")
    assert main(["estimate", "--method", "mrc", "--data", str(flat), "--config", cfg]) == 3
    # two-agent samples rarely contain an informative pair
    assert main(["montecarlo", "--design", "1", "--method", "mrc", "--n", "2", "--reps", "3",
                 "--out", str(tmp_path / "x.csv")]) == 4

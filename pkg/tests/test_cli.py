import csv
import json
import os

import pytest

from fracgelfand.cli import main


def _run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def test_solve_writes_outputs(tmp_path):
    assert _run(tmp_path, "solve", "--s", "0.75", "--n", "256", "--L", "auto") == 0
    with open(tmp_path / "profile.csv") as fh:
        assert fh.readline().strip() == "x,v,u,w"
    diag = json.loads((tmp_path / "diagnostics.json").read_text())
    assert diag["version"] and diag["config"]["n"] == 256
    meta = json.loads((tmp_path / "profile.meta.json").read_text())
    assert meta["config"]["s"] == 0.75


@pytest.mark.parametrize(
    "args, code",
    [
        (["solve", "--s", "0.4"], 1),
        (["solve", "--weight", "stretched_exp", "--beta", "1", "--m", "0.25"], 3),
        (["solve", "--n", "64", "--max-iter", "1", "--anderson", "0", "--tol", "1e-14"], 2),
        (["sweep", "--s-list", ""], 1),
    ],
)
def test_exit_codes(tmp_path, args, code):
    assert _run(tmp_path, *args) == code


def test_config_precedence_and_unknown_keys(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"s": 0.9, "n": 128}))
    assert _run(tmp_path, "solve", "--config", str(cfg), "--n", "256") == 0
    used = json.loads((tmp_path / "diagnostics.json").read_text())["config"]
    assert used["s"] == 0.9 and used["n"] == 256
    cfg.write_text(json.dumps({"s": 0.9, "colour": "red"}))
    assert _run(tmp_path, "solve", "--config", str(cfg)) == 1


def test_grid_exhausted_exit(tmp_path, monkeypatch):
    from fracgelfand import cli
    from fracgelfand.fixedpoint import SolveOptions

    monkeypatch.setattr(cli, "make_options", lambda cfg: SolveOptions(n=256, max_enlarge=0))
    assert _run(tmp_path, "solve", "--s", "0.75") == 4


def test_verify_oracle_and_corruption(tmp_path):
    run = tmp_path / "run"
    assert main(["oracle", "--out", str(run)]) == 0
    assert main(["verify", "--profile", str(run), "--out", str(tmp_path / "v"), "--laplace-samples", "3"]) == 0
    rows = (run / "profile.csv").read_text().splitlines()
    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "diagnostics.json").write_text((run / "diagnostics.json").read_text())
    out = [rows[0]]
    for i, line in enumerate(rows[1:]):
        x, v, u, w = line.split(",")
        if 50 <= i < 60:
            v = repr(-float(v))
        out.append(",".join([x, v, u, w]))
    (bad / "profile.csv").write_text("\n".join(out) + "\n")
    assert main(["verify", "--profile", str(bad), "--out", str(tmp_path / "vb")]) == 5
    rep = json.loads((tmp_path / "vb" / "verification.json").read_text())
    assert "monotone_ok" in rep["failed"]
    assert main(["verify", "--profile", str(run), "--no-spectral", "--laplace-samples", "2", "--out", str(tmp_path / "vn")]) == 0
    srep = json.loads((tmp_path / "vn" / "spectral.json").read_text())
    assert srep["skipped"]["morse_index"] == "disabled"


def test_continue_and_sweep(tmp_path):
    assert _run(tmp_path, "continue", "--s", "0.9", "--sigma", "1e-3", "--n", "256") == 0
    with open(tmp_path / "branch.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["lambda", "sigma", "mass", "v0", "xalpha_total"]
    assert float(rows[-1][1]) == 0.0
    assert _run(tmp_path, "sweep", "--s-list", "0.75,0.9", "--lambda-list", "1,0.5", "--n", "256", "--workers", "2") == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s", "lambda", "sigma", "mass", "morse_index", "pohozaev", "decay_p"]
    keys = [(float(r[0]), float(r[1])) for r in rows[1:]]
    assert keys == sorted(keys) and len(keys) == 4


def test_deterministic_outputs(tmp_path):
    for _ in range(2):
        assert _run(tmp_path, "solve", "--s", "0.75", "--n", "256") == 0
        snap = [(tmp_path / f).read_bytes() for f in ("profile.csv", "diagnostics.json", "profile.meta.json")]
        if _ == 0:
            first = snap
    assert snap == first

import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from hypoprop.cli import main
from hypoprop.scenario import read_pgm

CONFIG = """\
width: 48
height: 48
num_frames: 5
objects:
  - {shape: rect, size: [10, 10], start: [12, 12], velocity: [2, 1]}
  - {shape: ellipse, size: [8, 8], start: [36, 36], velocity: [-1, 0]}
"""


@pytest.fixture
def scenario(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(CONFIG)
    out = tmp_path / "sc.json"
    assert main(["synth", "--config", str(cfg), "--out", str(out)]) == 0
    return out


def test_synth_run_eval(tmp_path, scenario, capsys):
    run_dir = tmp_path / "run"
    assert main(["run", "--scenario", str(scenario), "--out", str(run_dir), "--N", "2"]) == 0
    labels = sorted((run_dir / "labels").glob("*.pgm"))
    assert [p.name for p in labels] == [f"{t:05d}.pgm" for t in range(5)]
    assert set(np.unique(read_pgm(labels[-1]))) == {0, 1, 2}
    meta = json.loads((run_dir / "run.json").read_text())
    assert meta["frames"] == 5 and meta["params"]["n_scan"] == 2
    with open(run_dir / "tracks.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10 and float(rows[-1]["J"]) == 1.0

    res = tmp_path / "eval.csv"
    assert main(["eval", "--pred", str(run_dir), "--scenario", str(scenario), "--out", str(res)]) == 0
    with open(res) as fh:
        rows = list(csv.DictReader(fh))
    stats = {(r["object"], r["statistic"]): r for r in rows}
    assert float(stats[("all", "mean")]["G"]) == 1.0
    assert float(stats[("1", "decay")]["J"]) == 0.0
    assert "G=1.0000" in capsys.readouterr().out


def test_mwis_check(capsys):
    assert main(["mwis-check", "--nodes", "10", "--trials", "12"]) == 0
    assert "12/12 trials" in capsys.readouterr().out


def test_errors_exit_2(tmp_path, scenario, capsys):
    assert main(["run", "--scenario", str(tmp_path / "none.json"), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["run", "--scenario", str(scenario), "--out", str(tmp_path / "o"), "--wm", "1.5"]) == 2
    assert main(["eval", "--pred", str(tmp_path), "--scenario", str(scenario), "--out", str(tmp_path / "e.csv")]) == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "hypoprop", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("synth", "run", "eval", "mwis-check"):
        assert cmd in res.stdout

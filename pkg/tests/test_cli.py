import csv
import hashlib
import json

import pytest

from qbrainsim.cli import main


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


LATTICE = "n_sites = 2\nn_fields = 1\nhalf_range = 1\nn_timesteps = 6\n"


def test_count(tmp_path, capsys):
    cfg = write(tmp_path, "a.cfg", LATTICE)
    assert main(["count", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["quantum_registers"] == 18 and rep["classical_registers"] == 2
    cfg = write(tmp_path, "b.cfg", "n_sites = 1\nn_fields = 1\nhalf_range = 0\n")
    assert main(["count", "--config", cfg, "--out", str(tmp_path / "o2")]) == 0
    assert json.loads(capsys.readouterr().out)["quantum_registers"] == 2


def test_config_errors_exit_2(tmp_path, capsys):
    bad = write(tmp_path, "bad.cfg", "n_sites = 2\nnope\n")
    assert main(["count", "--config", bad]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["count", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["simulate", "--config", bad, "--mode", "warp"]) == 2
    cfg = write(tmp_path, "a.cfg", LATTICE)
    assert main(["simulate", "--config", cfg, "--mode", "quantum"]) == 2  # no seed
    assert main(["experiment", "--config", cfg]) == 2  # no seed


def test_cap_exit_3(tmp_path, capsys):
    cfg = write(tmp_path, "big.cfg", "n_sites = 7\nn_fields = 1\nhalf_range = 1\n")
    code = main(["simulate", "--config", cfg, "--mode", "quantum", "--seed", "1", "--out", str(tmp_path / "o")])
    assert code == 3
    assert "2187" in capsys.readouterr().err  # 3^7


def sim(tmp_path, cfg, mode, name, *extra):
    out = tmp_path / name
    assert main(["simulate", "--config", cfg, "--mode", mode, "--out", str(out), *extra]) == 0
    return out


def test_classical_zero_state_constant(tmp_path):
    cfg = write(tmp_path, "a.cfg", LATTICE)
    out = sim(tmp_path, cfg, "classical", "c")
    rows = list(csv.DictReader(open(out / "trajectory.csv")))
    assert len(rows) == 7 and len({r["index"] for r in rows}) == 1


def test_three_tiers_write_identical_trajectories(tmp_path):
    cfg = write(
        tmp_path, "a.cfg",
        "n_sites = 3\nn_fields = 1\nhalf_range = 1\nn_timesteps = 10\ninitial_current = [1, 0, 0]\n",
    )
    c = sim(tmp_path, cfg, "classical", "c")
    s = sim(tmp_path, cfg, "statistical", "s")
    q = sim(tmp_path, cfg, "quantum", "q", "--seed", "7")
    text = (c / "trajectory.csv").read_text()
    assert (s / "trajectory.csv").read_text() == text
    assert (q / "trajectory.csv").read_text() == text
    assert (q / "collapse_log.csv").exists() and (s / "ensembles.jsonl").exists()


def test_manifest_hashes(tmp_path):
    cfg = write(tmp_path, "a.cfg", LATTICE)
    out = sim(tmp_path, cfg, "quantum", "q", "--seed", "3")
    man = json.loads((out / "manifest.json").read_text())
    assert man["subcommand"] == "simulate" and man["seed"] == 3
    for f in man["files"]:
        assert hashlib.sha256((out / f["path"]).read_bytes()).hexdigest() == f["sha256"]


def test_bad_initial_state(tmp_path):
    cfg = write(tmp_path, "a.cfg", LATTICE + "initial_current = [5, 0]\n")
    assert main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


EXPERIMENT = "n_trials = 20\nn_test_cues = 4\nn_seeds = 3\n"


def test_experiment_outputs_and_determinism(tmp_path):
    cfg = write(tmp_path, "e.cfg", EXPERIMENT)
    outs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["experiment", "--config", cfg, "--seed", "5", "--out", str(out)]) == 0
        outs.append(out)
    man = json.loads((outs[0] / "manifest.json").read_text())
    names = {f["path"] for f in man["files"]}
    assert {"sign_test.json", "many_worlds.json", "collapse_level.csv"} <= names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()


def test_experiment_single_branch_equal_scores(tmp_path):
    cfg = write(tmp_path, "e.cfg", EXPERIMENT + "n_patterns = 1\n")
    out = tmp_path / "o"
    assert main(["experiment", "--config", cfg, "--seed", "0", "--out", str(out)]) == 0
    none = json.loads((out / "collapse_level_none.json").read_text())
    branch = json.loads((out / "collapse_level_branch_level_after_separation.json").read_text())
    assert none["learning_score"] == branch["learning_score"]


def test_recall_demo(tmp_path, capsys):
    cfg = write(tmp_path, "e.cfg", "n_patterns = 1\n")
    out = tmp_path / "o"
    assert main(["recall-demo", "--config", cfg, "--seed", "0", "--out", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["recovered"]
    header = (out / "recall_trace.csv").read_text().splitlines()[0]
    assert header == "sweep,unit,flipped,energy"

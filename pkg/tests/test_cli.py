import json
import subprocess
import sys

import pytest

from twostage.cli import main
from twostage.dataset import class_counts, load_csv
from twostage.model import load_network

GRID = ["--classes", "3", "--per-class", "20", "--dims", "2", "--separation", "3",
        "--folds", "2", "--scenarios", "single_majority", "--ir-levels", "2",
        "--strategies", "baseline,ts:smote+rus", "--body-dims", "4", "--head-hidden", "4",
        "--epochs", "1"]


def test_generate_and_resample(tmp_path, capsys):
    data = tmp_path / "d.csv"
    assert main(["generate", str(data), "--classes", "3", "--per-class", "10", "--dims", "2"]) == 0
    ds = load_csv(data)
    assert class_counts(ds).tolist() == [10, 10, 10]
    # make it imbalanced, then rebalance
    lines = data.read_text().splitlines()
    (tmp_path / "imb.csv").write_text("\n".join(lines[:1] + lines[1:15] + lines[21:23]) + "\n")
    for method, expected in (("rus", 2), ("ros", 10), ("smote", 10)):
        out = tmp_path / f"{method}.csv"
        assert main(["resample", str(tmp_path / "imb.csv"), str(out), "--method", method, "--k", "3"]) == 0
        counts = class_counts(load_csv(out)).tolist()
        assert counts[0] == counts[2] == expected


def test_describe(tmp_path, capsys):
    out = tmp_path / "desc.csv"
    assert main(["describe-imbalance", "--classes", "8", "--per-class", "625", "--out", str(out)]) == 0
    text = out.read_text()
    assert "single_majority,10.0,625,62,62,62,62,62,62,62,1059" in text


def test_train_command(tmp_path, capsys):
    data = tmp_path / "d.csv"
    main(["generate", str(data), "--classes", "2", "--per-class", "20", "--dims", "2"])
    model = tmp_path / "net.npz"
    assert main(["train", str(data), str(model), "--test", str(data), "--epochs", "2",
                 "--strategy", "fs:smote", "--body-dims", "4"]) == 0
    assert load_network(model).config.body_dims == (4,)
    printed = capsys.readouterr().out
    scores = json.loads(printed[printed.index("{"):])
    assert set(scores) == {"acc", "avacc", "cba", "mavg"}


def test_run_and_summarize(tmp_path, capsys):
    out_dir = tmp_path / "grid"
    assert main(["run", *GRID, "--output-dir", str(out_dir), "--serial"]) == 0
    assert len((out_dir / "results.csv").read_text().splitlines()) == 1 + 2 * 2 * 4
    assert main(["summarize", str(out_dir / "results.csv")]) == 0
    assert "ts:smote+rus" in capsys.readouterr().out
    assert main(["ir-study", *GRID, "--output-dir", str(out_dir)]) == 0
    assert (out_dir / "ir_curve.csv").exists()


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"num_folds": 2, "strategies": ["baseline"], "ir_levels": [2.0],
                               "scenarios": ["linear"], "body_dims": [4], "head_hidden": 4,
                               "dataset": {"num_classes": 3, "samples_per_class": 10, "dims": 2},
                               "train": {"epochs": 1}}))
    out_dir = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--output-dir", str(out_dir), "--seed", "3"]) == 0
    assert len((out_dir / "results.csv").read_text().splitlines()) == 1 + 2 * 4


def test_partial_grid_exit_code(tmp_path, monkeypatch):
    from twostage import harness

    def broken(*a, **kw):
        raise RuntimeError("nope")

    monkeypatch.setattr(harness, "run_strategy", broken)
    assert main(["run", *GRID, "--output-dir", str(tmp_path / "g")]) == 3


@pytest.mark.parametrize("argv, code", [
    (["run", "--strategies", "ts:none+none"], 1),
    (["run", "--folds", "1"], 1),
    (["run", "--config", "/nonexistent.json"], 1),
    (["resample", "/nonexistent.csv", "/tmp/x.csv", "--method", "rus"], 2),
])
def test_error_exit_codes(argv, code, tmp_path):
    assert main(argv + (["--output-dir", str(tmp_path)] if argv[0] == "run" else [])) == code


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "twostage", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "describe-imbalance" in res.stdout

"""End-to-end CLI runs on a reduced configuration."""

import json
from pathlib import Path

import numpy as np
import pytest

from crackrnn.cli import main

SMALL_CONFIG = {
    "seed": 77,
    "years": 1,
    "inspection": {"n": 6, "strategy": "representative", "year": 1},
    "training": {"epochs": 2, "learning_rate": 1e-3, "seed": 0},
}


@pytest.fixture(scope="module")
def small_config_path(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps(SMALL_CONFIG))
    return path


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory, small_config_path) -> Path:
    out = tmp_path_factory.mktemp("data")
    assert main(["generate", "--config", str(small_config_path),
                 "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, small_config_path, dataset_dir) -> Path:
    out = tmp_path_factory.mktemp("train")
    assert main(["train", "--config", str(small_config_path),
                 "--data", str(dataset_dir), "--out", str(out),
                 "--no-figures"]) == 0
    return out


def test_generate_outputs(dataset_dir):
    for name in ("histories.csv", "truth.csv", "inspections.csv",
                 "manifest.json", "config.json"):
        assert (dataset_dir / name).exists()
    hist_lines = (dataset_dir / "histories.csv").read_text().splitlines()
    assert len(hist_lines) == 1 + 300 * 1460


def test_generate_same_seed_is_byte_identical(tmp_path, small_config_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["generate", "--config", str(small_config_path), "--out", str(a)]) == 0
    assert main(["generate", "--config", str(small_config_path), "--out", str(b)]) == 0
    for name in ("histories.csv", "truth.csv", "inspections.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_generate_year_override(tmp_path, small_config_path):
    out = tmp_path / "short"
    assert main(["generate", "--config", str(small_config_path), "--out", str(out),
                 "--years", "2", "--inspection-year", "1"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["years"] == 2
    lines = (out / "histories.csv").read_text().splitlines()
    assert len(lines) == 1 + 300 * 2920


def test_generate_rejects_bad_config(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"years": -1}))
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_generate_rejects_inconsistent_inspection_year(tmp_path):
    bad = tmp_path / "bad2.json"
    bad.write_text(json.dumps({"years": 1}))  # default inspection year 5 > 1
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "y")]) == 2


def test_train_outputs(trained_dir):
    assert (trained_dir / "checkpoint.json").exists()
    assert (trained_dir / "config.json").exists()
    report = json.loads((trained_dir / "train_report.json").read_text())
    assert len(report["loss_history"]) == report["epochs_run"] == 2
    assert report["checkpoint"] == "checkpoint.json"
    ckpt = json.loads((trained_dir / "checkpoint.json").read_text())
    assert "dense0" in ckpt and "alpha" in ckpt and "normalizer" in ckpt
    assert "data_manifest_sha256" in ckpt["meta"]


def test_train_missing_data_exits_3(tmp_path, small_config_path):
    assert main(["train", "--config", str(small_config_path),
                 "--data", str(tmp_path / "nowhere"),
                 "--out", str(tmp_path / "o"), "--no-figures"]) == 3


def test_train_corrupt_dataset_exits_3(tmp_path, small_config_path, dataset_dir):
    import shutil
    broken = tmp_path / "broken"
    shutil.copytree(dataset_dir, broken)
    (broken / "truth.csv").write_text("plane_id,cycle_index,crack_m\n0,1,not_a_number\n")
    assert main(["train", "--config", str(small_config_path),
                 "--data", str(broken), "--out", str(tmp_path / "o"),
                 "--no-figures"]) == 3


def test_evaluate_scatter(tmp_path, small_config_path, dataset_dir, trained_dir):
    out = tmp_path / "eval"
    assert main(["evaluate", "--config", str(small_config_path),
                 "--checkpoint", str(trained_dir / "checkpoint.json"),
                 "--data", str(dataset_dir), "--figure", "scatter",
                 "--out", str(out), "--no-figures"]) == 0
    lines = (out / "scatter.csv").read_text().splitlines()
    assert lines[0] == "actual_m,predicted_m,phase"
    assert len(lines) == 1 + 2 * 300
    phases = {line.rsplit(",", 1)[1] for line in lines[1:]}
    assert phases == {"before", "after"}
    index = json.loads((out / "index.json").read_text())
    assert "scatter.csv" in index["scatter"]


def test_evaluate_ratio_shape(tmp_path, small_config_path, dataset_dir, trained_dir):
    out = tmp_path / "eval_ratio"
    assert main(["evaluate", "--config", str(small_config_path),
                 "--checkpoint", str(trained_dir / "checkpoint.json"),
                 "--data", str(dataset_dir), "--figure", "ratio",
                 "--out", str(out), "--no-figures"]) == 0
    lines = (out / "ratio_band.csv").read_text().splitlines()
    assert lines[0] == "cycle,ratio_min,ratio_max"
    assert len(lines) == 1 + 1460


def test_evaluate_unreliability_monotone(tmp_path, small_config_path, dataset_dir):
    out = tmp_path / "eval_unrel"
    assert main(["evaluate", "--config", str(small_config_path),
                 "--data", str(dataset_dir), "--figure", "unreliability",
                 "--a-th", "0.0055", "--out", str(out), "--no-figures"]) == 0
    rows = (out / "unreliability.csv").read_text().splitlines()[1:]
    props = [float(r.split(",")[2]) for r in rows]
    assert all(b >= a for a, b in zip(props, props[1:]))


def test_evaluate_size_sweep_row_count(tmp_path, small_config_path, dataset_dir):
    out = tmp_path / "eval_sizes"
    assert main(["evaluate", "--config", str(small_config_path),
                 "--data", str(dataset_dir), "--figure", "size_sweep",
                 "--sizes", "3,5,8", "--out", str(out), "--no-figures"]) == 0
    lines = (out / "size_sweep.csv").read_text().splitlines()
    assert lines[0] == "n_train,fleet_mse"
    assert len(lines) == 4


def test_evaluate_checkpoint_dataset_mismatch(tmp_path, small_config_path,
                                              dataset_dir, trained_dir):
    other = tmp_path / "other_data"
    cfg = dict(SMALL_CONFIG, seed=78)
    cfg_path = tmp_path / "cfg78.json"
    cfg_path.write_text(json.dumps(cfg))
    assert main(["generate", "--config", str(cfg_path), "--out", str(other)]) == 0
    rc = main(["evaluate", "--config", str(small_config_path),
               "--checkpoint", str(trained_dir / "checkpoint.json"),
               "--data", str(other), "--figure", "scatter",
               "--out", str(tmp_path / "e"), "--no-figures"])
    assert rc == 3


def test_evaluate_requires_checkpoint_for_scatter(tmp_path, small_config_path, dataset_dir):
    rc = main(["evaluate", "--config", str(small_config_path),
               "--data", str(dataset_dir), "--figure", "scatter",
               "--out", str(tmp_path / "e2"), "--no-figures"])
    assert rc == 2


def test_sweep_distribution_csv(tmp_path, small_config_path, dataset_dir):
    out = tmp_path / "sweep_dist"
    assert main(["sweep", "--kind", "distribution", "--config", str(small_config_path),
                 "--data", str(dataset_dir), "--n", "4",
                 "--out", str(out), "--no-figures"]) == 0
    lines = (out / "distribution_sweep.csv").read_text().splitlines()
    assert lines[0] == "case,strategy,fleet_mse,ratio_min,ratio_max"
    assert len(lines) == 5
    assert lines[1].startswith("0,low_biased,")


def test_config_echo_everywhere(dataset_dir, trained_dir):
    for d in (dataset_dir, trained_dir):
        echoed = json.loads((d / "config.json").read_text())
        assert echoed["seed"] == 77
        assert echoed["training"]["epochs"] == 2


def test_figures_rendered_when_enabled(tmp_path, small_config_path, dataset_dir, trained_dir):
    out = tmp_path / "eval_figs"
    assert main(["evaluate", "--config", str(small_config_path),
                 "--checkpoint", str(trained_dir / "checkpoint.json"),
                 "--data", str(dataset_dir), "--figure", "scatter",
                 "--out", str(out)]) == 0
    assert (out / "figures" / "scatter.png").stat().st_size > 0

"""Test the multi-seed driver's exit codes and aggregate output."""

import importlib.util
from pathlib import Path

import pytest

from src import cli

SCRIPT = Path(__file__).resolve().parents[2] / "scripts" / "run_seeds.py"


@pytest.fixture(scope="module")
def run_seeds():
    spec = importlib.util.spec_from_file_location("run_seeds", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def _config(tmp_path, metrics: str) -> Path:
    data_dir = tmp_path / "data"
    assert cli.main(["synth", "--seed", "0", "--out-dir", str(data_dir)]) == 0
    path = tmp_path / "seeds.toml"
    path.write_text(
        f'[data]\ncsv = "{(data_dir / "synthetic.csv").as_posix()}"\n'
        f"[constraints]\nmetrics = {metrics}\n",
        encoding="utf-8",
    )
    return path


def test_aggregates_over_seeds(run_seeds, tmp_path):
    config = _config(tmp_path, "{ DP = 0.05 }")
    out = tmp_path / "seeds"
    assert run_seeds.main(["--config", str(config), "--seeds", "2", "--out-dir", str(out)]) == 0
    assert (out / "seed_0" / "report.json").exists()
    assert (out / "seed_1" / "recipe.json").exists()
    assert (out / "aggregate_Baseline.csv").exists()
    assert (out / "aggregate_ROCF-AD.csv").exists()


def test_invalid_config_is_input_error(run_seeds, tmp_path):
    config = _config(tmp_path, "{ XYZ = 0.05 }")
    assert run_seeds.main(["--config", str(config), "--seeds", "1", "--out-dir", str(tmp_path / "o")]) == 2


def test_missing_config_is_input_error(run_seeds, tmp_path):
    missing = tmp_path / "missing.toml"
    assert run_seeds.main(["--config", str(missing), "--seeds", "1", "--out-dir", str(tmp_path / "o")]) == 2

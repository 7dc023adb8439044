"""Test the logistic score preparation script on a small synthetic frame."""

import importlib.util
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

pytest.importorskip("sklearn")

from src.data.dataset import load_csv  # noqa: E402

SCRIPT = Path(__file__).resolve().parents[2] / "scripts" / "prepare_compas_scores.py"


@pytest.fixture(scope="module")
def prepare():
    spec = importlib.util.spec_from_file_location("prepare_compas_scores", SCRIPT)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.fixture
def clean_csv(tmp_path):
    rng = np.random.default_rng(3)
    n = 400
    priors = rng.poisson(3, size=n)
    frame = pd.DataFrame(
        {
            "age": rng.integers(18, 70, size=n),
            "priors_count": priors,
            "length_of_stay": rng.integers(0, 60, size=n),
            "c_charge_degree": rng.choice(["F", "M"], size=n),
            "sex": rng.choice(["Male", "Female"], size=n),
            "race": rng.choice(["African-American", "Caucasian"], size=n),
            "is_recid": (rng.random(n) < 0.2 + 0.1 * np.minimum(priors, 6)).astype(int),
        }
    )
    path = tmp_path / "clean.csv"
    frame.to_csv(path, index=False)
    return path


def test_writes_scored_csv(prepare, clean_csv, tmp_path):
    out = tmp_path / "scores.csv"
    assert prepare.main(["--input", str(clean_csv), "--output", str(out), "--seed", "1"]) == 0
    data = load_csv(out)
    assert len(data) == 400
    assert set(data.group_names) == {"African-American", "Caucasian"}
    assert 0.0 <= data.scores.min() and data.scores.max() <= 1.0
    # Priors drive the label, so positives score higher on average.
    assert data.scores[data.labels == 1].mean() > data.scores[data.labels == 0].mean()


def test_same_seed_same_scores(prepare, clean_csv, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    prepare.main(["--input", str(clean_csv), "--output", str(a)])
    prepare.main(["--input", str(clean_csv), "--output", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_missing_column_is_input_error(prepare, tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"age": [20, 30], "is_recid": [0, 1]}).to_csv(path, index=False)
    assert prepare.main(["--input", str(path), "--output", str(tmp_path / "o.csv")]) == 2

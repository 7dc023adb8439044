import numpy as np
import pytest

from src.config import BetaParams, SynthConfig, SynthGroupConfig
from src.data.dataset import Dataset
from src.data.synth import synth_generate


def random_dataset(rng: np.random.Generator, sizes: list[int], distinct: bool = True) -> Dataset:
    """Random scored groups with at least one positive and one negative each."""
    scores, groups, labels = [], [], []
    for g, n in enumerate(sizes):
        y = rng.integers(0, 2, size=n)
        y[0], y[1] = 1, 0
        s = rng.random(n) if distinct else rng.integers(0, 10, size=n) / 10
        # Positives skew high so hulls have interior structure.
        s = (s + 0.2 * y * rng.random(n)) / 1.2
        scores.append(s)
        groups.append(np.full(n, g))
        labels.append(y)
    return Dataset.from_arrays(
        np.concatenate(scores), np.concatenate(groups), np.concatenate(labels), group_count=len(sizes)
    )


@pytest.fixture
def make_dataset():
    return random_dataset


@pytest.fixture
def four_sample_group():
    """Scores 0.9:+, 0.7:-, 0.4:+, 0.1:- in a single group."""
    return Dataset.from_arrays([0.9, 0.7, 0.4, 0.1], [0, 0, 0, 0], [1, 0, 1, 0])


@pytest.fixture
def synth_config():
    return SynthConfig(
        groups=[
            SynthGroupConfig(label="A", n_pos=120, n_neg=180),
            SynthGroupConfig(
                label="B",
                n_pos=80,
                n_neg=220,
                pos=BetaParams(a=3.0, b=2.0),
                neg=BetaParams(a=2.0, b=3.0),
            ),
        ]
    )


@pytest.fixture
def synth_data(synth_config):
    return synth_generate(synth_config, seed=0)


@pytest.fixture
def write_scored_csv(tmp_path):
    """Write rows of (score, group, label) to a CSV and return its path."""

    def _write(rows, name="scores.csv", header="score,group,label"):
        path = tmp_path / name
        lines = [header] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return _write

"""Test CSV ingest, splits and group statistics."""

import numpy as np
import pytest

from src.data.dataset import (
    CsvSchema,
    Dataset,
    align_groups,
    group_stats,
    load_csv,
    split,
    write_csv,
)
from src.errors import DataError


def test_load_csv_indexes_groups_by_first_appearance(write_scored_csv):
    path = write_scored_csv([(0.9, "A", 1), (0.1, "A", 0), (0.8, "B", 1), (0.2, "B", 0)])
    data = load_csv(path)

    assert data.group_count == 2
    assert data.group_names == ("A", "B")
    assert data.groups.tolist() == [0, 0, 1, 1]
    assert data.labels.tolist() == [1, 0, 1, 0]
    assert data.scores.tolist() == [0.9, 0.1, 0.8, 0.2]
    assert data.row_ids.tolist() == [0, 1, 2, 3]


def test_load_csv_names_offending_line(write_scored_csv):
    path = write_scored_csv([(0.9, "A", 1), (1.5, "A", 0)])
    with pytest.raises(DataError, match="line 3"):
        load_csv(path)


@pytest.mark.parametrize(
    "row, message",
    [
        (("abc", "A", 1), "not a number"),
        ((0.4, "A", 2), "label"),
        ((-0.1, "A", 0), "outside"),
    ],
)
def test_load_csv_rejects_malformed_rows(write_scored_csv, row, message):
    path = write_scored_csv([(0.5, "A", 1), row])
    with pytest.raises(DataError, match=message):
        load_csv(path)


def test_load_csv_missing_column(write_scored_csv):
    path = write_scored_csv([(0.5, "A")], header="score,group")
    with pytest.raises(DataError, match="missing column"):
        load_csv(path)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_csv(tmp_path / "nope.csv")


def test_load_csv_custom_columns(write_scored_csv):
    path = write_scored_csv([(0.7, "x", 1), (0.3, "y", 0)], header="p,race,y")
    data = load_csv(path, CsvSchema(score_col="p", group_col="race", label_col="y"))
    assert data.group_names == ("x", "y")
    assert len(data) == 2


def test_integer_group_ids_keep_their_text(write_scored_csv):
    path = write_scored_csv([(0.7, 7, 1), (0.3, 3, 0), (0.2, 7, 0)])
    data = load_csv(path)
    assert data.group_names == ("7", "3")
    assert data.groups.tolist() == [0, 1, 0]


def test_write_then_load_preserves_scores_exactly(tmp_path, synth_data):
    path = tmp_path / "out.csv"
    write_csv(synth_data, path)
    loaded = load_csv(path)
    np.testing.assert_array_equal(loaded.scores, synth_data.scores)
    np.testing.assert_array_equal(loaded.labels, synth_data.labels)
    # Group ids are re-indexed by first appearance; names must still line up.
    assert [loaded.group_names[g] for g in loaded.groups] == [
        synth_data.group_names[g] for g in synth_data.groups
    ]


def test_load_csv_parses_seventeen_digit_scores_exactly(write_scored_csv):
    values = [0.30000000000000004, 0.1, 0.7853981633974483, 2.220446049250313e-16]
    path = write_scored_csv([(f"{v:.17g}", "A", i % 2) for i, v in enumerate(values)])
    assert load_csv(path).scores.tolist() == values


def test_split_sizes_and_determinism():
    data = Dataset.from_arrays(np.linspace(0, 1, 100), np.zeros(100), np.arange(100) % 2)
    first = split(data, (0.3, 0.35, 0.35), seed=7)
    second = split(data, (0.3, 0.35, 0.35), seed=7)

    assert [len(part) for part in first] == [30, 35, 35]
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.row_ids, b.row_ids)


def test_split_is_a_partition():
    data = Dataset.from_arrays(np.linspace(0, 1, 101), np.zeros(101), np.arange(101) % 2)
    parts = split(data, (0.3, 0.35, 0.35), seed=3)
    ids = np.concatenate([p.row_ids for p in parts])
    assert sorted(ids.tolist()) == list(range(101))


def test_split_depends_on_seed():
    data = Dataset.from_arrays(np.linspace(0, 1, 100), np.zeros(100), np.arange(100) % 2)
    post_7 = split(data, (0.3, 0.35, 0.35), seed=7)[1]
    post_8 = split(data, (0.3, 0.35, 0.35), seed=8)[1]
    assert set(post_7.row_ids.tolist()) != set(post_8.row_ids.tolist())


def test_split_rejects_fractions_not_summing_to_one():
    data = Dataset.from_arrays([0.1, 0.9], [0, 0], [0, 1])
    with pytest.raises(DataError, match="sum to 1"):
        split(data, (0.5, 0.5, 0.5), seed=0)


def test_group_stats_counts(synth_data):
    stats = group_stats(synth_data)
    assert stats.n_pos.tolist() == [120, 80]
    assert stats.n_neg.tolist() == [180, 220]
    assert stats.total == 600
    assert stats.prevalence == pytest.approx([0.4, 80 / 300])
    assert stats.proportion == pytest.approx([0.5, 0.5])


def test_align_groups_follows_reference_order():
    data = Dataset.from_arrays([0.2, 0.8], [0, 1], [0, 1], group_names=("B", "A"))
    aligned = align_groups(data, ("A", "B"))
    assert aligned.groups.tolist() == [1, 0]
    assert aligned.group_names == ("A", "B")


def test_align_groups_rejects_unknown_group():
    data = Dataset.from_arrays([0.2, 0.8], [0, 1], [0, 1], group_names=("A", "C"))
    with pytest.raises(DataError, match="C"):
        align_groups(data, ("A", "B"))


def test_dataset_rejects_scores_outside_unit_interval():
    with pytest.raises(DataError):
        Dataset.from_arrays([0.2, 1.2], [0, 0], [0, 1])

"""Test empirical ROC points, hull extraction and membership."""

import numpy as np
import pytest

from src.data.dataset import Dataset
from src.errors import DegenerateGroupError
from src.pipeline.roc import (
    RatePoint,
    build_hull,
    build_hulls,
    empirical_roc,
    hull_contains,
    hull_table,
)


def brute_force_hull(fp: np.ndarray, tp: np.ndarray) -> list[tuple[int, int]]:
    """Upper-envelope vertices by checking every chord, O(n^3).

    A point is dropped when some chord A-B spanning it lies on or above it.
    The endpoints (0, 0) and (n_neg, n_pos) are always kept.
    """
    pts = sorted(set(zip(fp.tolist(), tp.tolist())))
    x = np.array([p[0] for p in pts], dtype=np.int64)
    y = np.array([p[1] for p in pts], dtype=np.int64)
    ax, bx = x[:, None], x[None, :]
    ay, by = y[:, None], y[None, :]
    last = (int(x.max()), int(y.max()))
    keep = []
    for i, (px, py) in enumerate(pts):
        if (px, py) in ((0, 0), last):
            keep.append((px, py))
            continue
        not_p = (np.arange(len(pts))[:, None] != i) & (np.arange(len(pts))[None, :] != i)
        spans = (ax < bx) & (ax <= px) & (px <= bx) & not_p
        below = py * (bx - ax) <= ay * (bx - px) + by * (px - ax)
        if not np.any(spans & below):
            keep.append((px, py))
    return keep


def test_empirical_roc_four_samples(four_sample_group):
    points = empirical_roc(four_sample_group, 0)
    assert [(p.tpr, p.fpr) for p in points] == [(0, 0), (0.5, 0), (0.5, 0.5), (1, 0.5), (1, 1)]


def test_hull_drops_interior_point(four_sample_group):
    hull = build_hull(four_sample_group, 0)
    assert [(s.tpr, s.fpr) for s in hull.supports] == [(0, 0), (0.5, 0), (1, 0.5), (1, 1)]
    assert hull.supports[0].above_all
    assert [s.threshold for s in hull.supports[1:]] == [0.9, 0.4, 0.1]


def test_hull_thresholds_reproduce_supports(make_dataset):
    rng = np.random.default_rng(11)
    data = make_dataset(rng, [80, 60], distinct=False)
    for hull in build_hulls(data):
        mask = data.group_mask(hull.group)
        scores, labels = data.scores[mask], data.labels[mask]
        for s in hull.supports:
            predicted = s.predicts(scores, data.row_ids[mask])
            assert int(np.sum(predicted & (labels == 1))) == s.tp
            assert int(np.sum(predicted & (labels == 0))) == s.fp


def test_all_scores_tied_group_cuts_ties_by_row_id():
    data = Dataset.from_arrays([0.5] * 6, [0] * 6, [1, 0, 1, 0, 0, 1])
    points = empirical_roc(data, 0)
    assert (points[-1].tpr, points[-1].fpr) == (1.0, 1.0)
    hull = build_hull(data, 0)
    assert [(s.tp, s.fp) for s in hull.supports] == [(0, 0), (1, 0), (2, 1), (3, 3)]
    assert [s.tie_cut for s in hull.supports] == [None, 0, 2, None]
    assert all(s.threshold == 0.5 for s in hull.supports[1:])
    for point in points:
        assert hull_contains(hull, point, tol=1e-12)
    for s in hull.supports:
        predicted = s.predicts(data.scores, data.row_ids)
        assert int(np.sum(predicted & (data.labels == 1))) == s.tp
        assert int(np.sum(predicted & (data.labels == 0))) == s.fp


def test_partial_tie_block_can_be_a_support():
    data = Dataset.from_arrays([0.9, 0.5, 0.5, 0.1], [0] * 4, [1, 1, 0, 0])
    hull = build_hull(data, 0)
    assert [(s.tpr, s.fpr) for s in hull.supports] == [(0, 0), (1, 0), (1, 1)]
    perfect = hull.supports[1]
    assert (perfect.threshold, perfect.tie_cut) == (0.5, 1)
    assert perfect.predicts(data.scores, data.row_ids).tolist() == [True, True, False, False]
    with pytest.raises(ValueError, match="row ids"):
        perfect.predicts(data.scores)


def test_separable_group_contains_perfect_point():
    data = Dataset.from_arrays([0.9, 0.8, 0.2, 0.1], [0] * 4, [1, 1, 0, 0])
    hull = build_hull(data, 0)
    assert hull_contains(hull, RatePoint(tpr=1.0, fpr=0.0))


def test_anti_predictive_hull_stays_on_diagonal():
    data = Dataset.from_arrays([0.9, 0.8, 0.2, 0.1], [0] * 4, [0, 0, 1, 1])
    hull = build_hull(data, 0)
    assert [(s.tpr, s.fpr) for s in hull.supports] == [(0, 0), (1, 1)]


def test_group_without_positives_is_rejected():
    data = Dataset.from_arrays([0.9, 0.1, 0.5], [0, 0, 1], [0, 0, 1])
    with pytest.raises(DegenerateGroupError) as err:
        build_hull(data, 0)
    assert err.value.n_pos == 0


@pytest.mark.slow
def test_hull_matches_brute_force(make_dataset):
    rng = np.random.default_rng(2024)
    for _ in range(100):
        n = int(rng.integers(2, 201))
        data = make_dataset(rng, [n], distinct=bool(rng.integers(2)))
        hull = build_hull(data, 0)

        order = np.lexsort((data.row_ids, -data.scores))
        labels = data.labels[order]
        tp = np.concatenate([[0], np.cumsum(labels)])
        fp = np.arange(n + 1) - tp
        assert [(s.fp, s.tp) for s in hull.supports] == brute_force_hull(fp, tp)


@pytest.mark.parametrize("distinct", [True, False])
def test_hull_dominates_every_roc_point(make_dataset, distinct):
    rng = np.random.default_rng(5)
    data = make_dataset(rng, [150, 90], distinct=distinct)
    for hull in build_hulls(data):
        for point in empirical_roc(data, hull.group):
            assert hull_contains(hull, point, tol=1e-12)


def test_hull_contains_vertices_and_edge_midpoints(four_sample_group):
    hull = build_hull(four_sample_group, 0)
    for s in hull.supports:
        assert hull_contains(hull, RatePoint(tpr=s.tpr, fpr=s.fpr))
    for a, b in zip(hull.supports, hull.supports[1:]):
        mid = RatePoint(tpr=(a.tpr + b.tpr) / 2, fpr=(a.fpr + b.fpr) / 2)
        assert hull_contains(hull, mid, tol=1e-12)


def test_hull_contains_rejects_outside_points(four_sample_group):
    hull = build_hull(four_sample_group, 0)
    assert not hull_contains(hull, RatePoint(tpr=1.0, fpr=0.0))
    # Below the diagonal is outside the threshold region of this group.
    assert not hull_contains(hull, RatePoint(tpr=0.25, fpr=0.75))
    assert hull_contains(hull, RatePoint(tpr=0.5, fpr=0.5))


def test_hull_contains_rejects_negative_tolerance(four_sample_group):
    hull = build_hull(four_sample_group, 0)
    with pytest.raises(ValueError):
        hull_contains(hull, RatePoint(tpr=0.5, fpr=0.5), tol=-1e-3)


def test_hull_table_columns(four_sample_group):
    table = hull_table([build_hull(four_sample_group, 0)], ("A",))
    assert list(table.columns) == ["group", "above_all", "threshold", "tie_cut", "tpr", "fpr", "selection_rate"]
    assert len(table) == 4
    assert np.isnan(table.loc[0, "threshold"])
    assert table["selection_rate"].tolist() == pytest.approx([0.0, 0.25, 0.75, 1.0])

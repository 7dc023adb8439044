"""Group-wise empirical ROC curves and their convex hulls.

Rank thresholding: within a group, order samples by (score desc, row id asc)
and let classifier j predict 1 on the first j of them. Every rank is a hull
candidate. A support ending a tie block is the inclusive rule ``score >= t``;
one inside a block also cuts the ties at t by row id, so exactly j samples
are selected.

The upper hull is extracted with Andrew's monotone chain on integer
(false positive, true positive) counts, so vertex selection is exact.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.data.dataset import Dataset
from src.errors import DegenerateGroupError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RatePoint:
    tpr: float
    fpr: float

    @property
    def fnr(self) -> float:
        return 1.0 - self.tpr

    def lifted(self) -> np.ndarray:
        return np.array([self.tpr, self.fpr, 1.0])


@dataclass(frozen=True)
class HullSupport:
    """One upper-hull vertex and the threshold rule that generates it.

    ``above_all`` marks the all-negative classifier (rank 0); it has no
    threshold value. ``tie_cut`` is set when the rank falls inside a block of
    tied scores: samples scored exactly ``threshold`` are selected only up to
    that row id.
    """

    threshold: float | None
    above_all: bool
    tp: int
    fp: int
    n_pos: int
    n_neg: int
    tie_cut: int | None = None

    @property
    def selected(self) -> int:
        return self.tp + self.fp

    @property
    def tpr(self) -> float:
        return self.tp / self.n_pos

    @property
    def fpr(self) -> float:
        return self.fp / self.n_neg

    @property
    def fnr(self) -> float:
        return (self.n_pos - self.tp) / self.n_pos

    @property
    def selection_rate(self) -> float:
        return self.selected / (self.n_pos + self.n_neg)

    def predicts(self, scores: np.ndarray, row_ids: np.ndarray | None = None) -> np.ndarray:
        if self.above_all:
            return np.zeros(len(scores), dtype=bool)
        return select(scores, row_ids, self.threshold, self.tie_cut)


@dataclass(frozen=True)
class GroupHull:
    group: int
    supports: tuple[HullSupport, ...]
    # Lower hull of the threshold points, (0,0) to (1,1); closes the realizable polygon.
    lower: tuple[RatePoint, ...]
    n_pos: int
    n_neg: int

    @property
    def n(self) -> int:
        return self.n_pos + self.n_neg

    @property
    def tpr(self) -> np.ndarray:
        return np.array([s.tpr for s in self.supports])

    @property
    def fpr(self) -> np.ndarray:
        return np.array([s.fpr for s in self.supports])

    @property
    def fnr(self) -> np.ndarray:
        return np.array([s.fnr for s in self.supports])

    @property
    def selection_rate(self) -> np.ndarray:
        return np.array([s.selection_rate for s in self.supports])

    @property
    def lifted(self) -> np.ndarray:
        """Rows r_j = (tpr_j, fpr_j, 1), one per support."""
        return np.column_stack([self.tpr, self.fpr, np.ones(len(self.supports))])

    @property
    def edge_count(self) -> int:
        return len(self.supports) - 1


def select(
    scores: np.ndarray, row_ids: np.ndarray | None, threshold: float, tie_cut: int | None
) -> np.ndarray:
    """``score > t``, plus the ties at t whose row id is at most ``tie_cut`` (all when None)."""
    scores = np.asarray(scores, dtype=float)
    if tie_cut is None:
        return scores >= threshold
    if row_ids is None:
        raise ValueError("a rule with a tie cut needs row ids")
    return (scores > threshold) | ((scores == threshold) & (np.asarray(row_ids) <= tie_cut))


def _ranked(data: Dataset, group: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mask = data.group_mask(group)
    scores = data.scores[mask]
    row_ids = data.row_ids[mask]
    order = np.lexsort((row_ids, -scores))
    return scores[order], data.labels[mask][order], row_ids[order]


def _check_group(group: int, labels: np.ndarray) -> tuple[int, int]:
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateGroupError(group, n_pos, n_neg)
    return n_pos, n_neg


def _cumulative_counts(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    tp = np.concatenate([[0], np.cumsum(labels)]).astype(np.int64)
    fp = np.arange(len(labels) + 1, dtype=np.int64) - tp
    return tp, fp


def empirical_roc(data: Dataset, group: int) -> list[RatePoint]:
    """All n_a + 1 rank-threshold operating points, rank 0 first."""
    _, labels, _ = _ranked(data, group)
    n_pos, n_neg = _check_group(group, labels)
    tp, fp = _cumulative_counts(labels)
    return [RatePoint(t / n_pos, f / n_neg) for t, f in zip(tp.tolist(), fp.tolist())]


def _cross(o: tuple[int, int], a: tuple[int, int], b: tuple[int, int]) -> int:
    # Points are (fp, tp); the sign matches the cross product in (fpr, tpr).
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _monotone_chain(points: list[tuple[int, int, int]], upper: bool) -> list[tuple[int, int, int]]:
    chain: list[tuple[int, int, int]] = []
    for p in points:
        while len(chain) >= 2:
            turn = _cross(chain[-2][:2], chain[-1][:2], p[:2])
            if (upper and turn >= 0) or (not upper and turn <= 0):
                chain.pop()
            else:
                break
        chain.append(p)
    return chain


def build_hull(data: Dataset, group: int) -> GroupHull:
    scores, labels, row_ids = _ranked(data, group)
    n_pos, n_neg = _check_group(group, labels)
    tp, fp = _cumulative_counts(labels)
    n = len(labels)

    # block_end[j]: rank j selects whole tie blocks, so score >= t reproduces it.
    block_end = np.ones(n + 1, dtype=bool)
    block_end[1:n] = scores[:-1] > scores[1:]

    # Path order is already sorted by (fp, tp) ascending.
    candidates = [(int(fp[j]), int(tp[j]), j) for j in range(n + 1)]
    upper = _monotone_chain(candidates, upper=True)
    lower = _monotone_chain(candidates, upper=False)

    supports = tuple(
        HullSupport(
            threshold=None if j == 0 else float(scores[j - 1]),
            above_all=j == 0,
            tp=t,
            fp=f,
            n_pos=n_pos,
            n_neg=n_neg,
            tie_cut=None if block_end[j] else int(row_ids[j - 1]),
        )
        for f, t, j in upper
    )
    hull = GroupHull(
        group=group,
        supports=supports,
        lower=tuple(RatePoint(t / n_pos, f / n_neg) for f, t, _ in lower),
        n_pos=n_pos,
        n_neg=n_neg,
    )
    logger.debug(
        "Group %d: %d samples, %d tie blocks, %d hull supports",
        group,
        n,
        int(block_end.sum()) - 1,
        len(supports),
    )
    return hull


def build_hulls(data: Dataset) -> list[GroupHull]:
    hulls = [build_hull(data, g) for g in range(data.group_count)]
    logger.info(
        "Built hulls: %s",
        ", ".join(f"{data.group_names[h.group]}={len(h.supports)}" for h in hulls),
    )
    return hulls


def _polygon(hull: GroupHull) -> list[tuple[float, float]]:
    """Counter-clockwise (fpr, tpr) vertices of the realizable region."""
    lower = [(p.fpr, p.tpr) for p in hull.lower]
    upper = [(s.fpr, s.tpr) for s in reversed(hull.supports)]
    return lower + upper[1:-1]


def hull_contains(hull: GroupHull, point: RatePoint, tol: float = 0.0) -> bool:
    """True iff ``point`` lies in the convex hull of the threshold operating points."""
    if tol < 0:
        raise ValueError(f"tol must be non-negative, got {tol}")
    x, y = point.fpr, point.tpr
    if not (-tol <= x <= 1.0 + tol and -tol <= y <= 1.0 + tol):
        return False

    poly = _polygon(hull)
    for (ax, ay), (bx, by) in zip(poly, poly[1:] + poly[:1]):
        ex, ey = bx - ax, by - ay
        length = np.hypot(ex, ey)
        if length == 0.0:
            continue
        if (ex * (y - ay) - ey * (x - ax)) / length < -tol:
            return False
    return True


def hull_table(hulls: list[GroupHull], group_names: tuple[str, ...] = ()) -> pd.DataFrame:
    rows = []
    for hull in hulls:
        name = group_names[hull.group] if group_names else str(hull.group)
        for s in hull.supports:
            rows.append(
                {
                    "group": name,
                    "above_all": s.above_all,
                    "threshold": np.nan if s.above_all else s.threshold,
                    "tie_cut": s.tie_cut,
                    "tpr": s.tpr,
                    "fpr": s.fpr,
                    "selection_rate": s.selection_rate,
                }
            )
    table = pd.DataFrame(
        rows, columns=["group", "above_all", "threshold", "tie_cut", "tpr", "fpr", "selection_rate"]
    )
    table["tie_cut"] = table["tie_cut"].astype("Int64")
    return table

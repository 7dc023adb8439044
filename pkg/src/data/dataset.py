"""Scored datasets: CSV ingest, seeded splits and per-group statistics.

A dataset is the post-processing input: one predictor score in [0, 1], a
protected-group id and a binary label per individual. Group ids from the file
(strings or integers) are re-indexed densely in order of first appearance;
the original names are kept for reporting.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from src.errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoredSample:
    score: float
    group: int
    label: int


@dataclass(frozen=True)
class CsvSchema:
    score_col: str = "score"
    group_col: str = "group"
    label_col: str = "label"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-oriented scored dataset.

    ``row_ids`` are the row positions in the originating file; they survive
    splits and drive both rank tie-breaking and the per-sample random streams.
    """

    scores: np.ndarray
    groups: np.ndarray
    labels: np.ndarray
    row_ids: np.ndarray
    group_count: int
    group_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        n = len(self.scores)
        if not (len(self.groups) == len(self.labels) == len(self.row_ids) == n):
            raise ValueError("dataset columns must have equal length")
        if self.group_count < 1:
            raise DataError(f"group_count must be positive, got {self.group_count}")
        if n and (self.groups.min() < 0 or self.groups.max() >= self.group_count):
            raise DataError(f"group ids must lie in 0..{self.group_count - 1}")
        if n and not np.all(np.isfinite(self.scores)):
            raise DataError("scores must be finite")
        if n and (self.scores.min() < 0.0 or self.scores.max() > 1.0):
            raise DataError("scores must lie in [0, 1]")
        if not self.group_names:
            object.__setattr__(
                self, "group_names", tuple(str(g) for g in range(self.group_count))
            )

    def __len__(self) -> int:
        return len(self.scores)

    def subset(self, index: np.ndarray) -> "Dataset":
        return Dataset(
            scores=self.scores[index],
            groups=self.groups[index],
            labels=self.labels[index],
            row_ids=self.row_ids[index],
            group_count=self.group_count,
            group_names=self.group_names,
        )

    def group_mask(self, group: int) -> np.ndarray:
        return self.groups == group

    @classmethod
    def from_arrays(
        cls,
        scores,
        groups,
        labels,
        group_count: int | None = None,
        group_names: tuple[str, ...] = (),
    ) -> "Dataset":
        scores = np.asarray(scores, dtype=float)
        groups = np.asarray(groups, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if group_count is None:
            group_count = int(groups.max()) + 1 if len(groups) else 1
        return cls(
            scores=scores,
            groups=groups,
            labels=labels,
            row_ids=np.arange(len(scores), dtype=np.int64),
            group_count=group_count,
            group_names=group_names,
        )


@dataclass(frozen=True, eq=False)
class GroupStats:
    """Plug-in group statistics; counts are exact integers."""

    n: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray

    @property
    def group_count(self) -> int:
        return len(self.n)

    @property
    def total(self) -> int:
        return int(self.n.sum())

    @property
    def prevalence(self) -> np.ndarray:
        """pi_a = n_{a,1} / n_a (NaN for empty groups)."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.n_pos / self.n

    @property
    def proportion(self) -> np.ndarray:
        """p_a = n_a / N."""
        return self.n / self.total


def group_stats(data: Dataset) -> GroupStats:
    m = data.group_count
    n_pos = np.bincount(data.groups[data.labels == 1], minlength=m).astype(np.int64)
    n_neg = np.bincount(data.groups[data.labels == 0], minlength=m).astype(np.int64)
    return GroupStats(n=n_pos + n_neg, n_pos=n_pos, n_neg=n_neg)


def load_csv(path: str | Path, schema: CsvSchema = CsvSchema()) -> Dataset:
    """Parse a header-first UTF-8 CSV into a Dataset.

    Raises DataError naming the first offending file line (the header is line 1).
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: file not found")

    try:
        frame = pd.read_csv(
            path,
            encoding="utf-8",
            dtype={schema.group_col: str},
            keep_default_na=False,
            skip_blank_lines=True,
            float_precision="round_trip",
        )
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: malformed CSV: {exc}") from exc
    missing = [
        col
        for col in (schema.score_col, schema.group_col, schema.label_col)
        if col not in frame.columns
    ]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")

    scores = pd.to_numeric(frame[schema.score_col], errors="coerce")
    labels = pd.to_numeric(frame[schema.label_col], errors="coerce")
    group_raw = frame[schema.group_col].astype(str).str.strip()

    def fail(mask: pd.Series, what: str) -> None:
        bad = np.flatnonzero(mask.to_numpy())
        if len(bad):
            row = bad[0]
            raise DataError(f"{path}: line {row + 2}: {what}")

    fail(scores.isna(), "score is not a number")
    fail(~np.isfinite(scores), "score is not finite")
    fail((scores < 0.0) | (scores > 1.0), "score outside [0, 1]")
    fail(labels.isna() | ~labels.isin([0, 1]), "label not in {0, 1}")
    fail(group_raw == "", "empty group id")

    codes, uniques = pd.factorize(group_raw, sort=False)
    data = Dataset(
        scores=scores.to_numpy(dtype=float),
        groups=codes.astype(np.int64),
        labels=labels.to_numpy(dtype=np.int64),
        row_ids=np.arange(len(frame), dtype=np.int64),
        group_count=max(len(uniques), 1),
        group_names=tuple(str(u) for u in uniques),
    )
    logger.info(
        "Loaded %d rows from %s with %d group(s): %s",
        len(data),
        path,
        data.group_count,
        ", ".join(f"{name}->{i}" for i, name in enumerate(data.group_names)),
    )
    return data


def align_groups(data: Dataset, names: tuple[str, ...]) -> Dataset:
    """Re-index groups to the order of ``names`` (e.g. TEST onto POST's mapping)."""
    position = {name: i for i, name in enumerate(names)}
    unknown = [name for name in data.group_names if name not in position]
    if unknown:
        raise DataError(f"group(s) {unknown} not present in reference groups {list(names)}")
    remap = np.array([position[name] for name in data.group_names], dtype=np.int64)
    return Dataset(
        scores=data.scores,
        groups=remap[data.groups] if len(data) else data.groups,
        labels=data.labels,
        row_ids=data.row_ids,
        group_count=len(names),
        group_names=tuple(names),
    )


def write_csv(data: Dataset, path: str | Path, schema: CsvSchema = CsvSchema()) -> None:
    frame = pd.DataFrame(
        {
            schema.score_col: data.scores,
            schema.group_col: [data.group_names[g] for g in data.groups],
            schema.label_col: data.labels,
        }
    )
    frame.to_csv(path, index=False, encoding="utf-8", float_format="%.17g")


def split(
    data: Dataset, fractions: tuple[float, float, float], seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    """Uniform random TRAIN/POST/TEST partition (no stratification)."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise DataError(f"split fractions must be three positive reals, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"split fractions must sum to 1, got {sum(fractions)}")

    n = len(data)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_post = int(round(fractions[1] * n))
    n_post = min(n_post, n - n_train)

    train_idx = np.sort(perm[:n_train])
    post_idx = np.sort(perm[n_train : n_train + n_post])
    test_idx = np.sort(perm[n_train + n_post :])
    logger.info(
        "Split %d rows (seed=%d): train=%d post=%d test=%d",
        n,
        seed,
        len(train_idx),
        len(post_idx),
        len(test_idx),
    )
    return data.subset(train_idx), data.subset(post_idx), data.subset(test_idx)

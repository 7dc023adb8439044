"""Synthetic scored populations with known class-conditional score laws.

Scores of positives and negatives in each group are drawn from configured
Beta distributions, so the population ROC curve of every group is known in
closed form (scipy.stats.beta) and test suites can compare against it.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy import integrate, stats

from src.config import BetaParams, SynthConfig, SynthGroupConfig
from src.data.dataset import Dataset
from src.errors import DataError

logger = logging.getLogger(__name__)


def synth_generate(spec: SynthConfig, seed: int) -> Dataset:
    """Draw a dataset; rows are shuffled, deterministic per seed."""
    if not spec.groups:
        raise DataError("synthetic spec needs at least one group")
    rng = np.random.default_rng(seed)

    scores: list[np.ndarray] = []
    groups: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    for g, cell in enumerate(spec.groups):
        if cell.n_pos < 1 or cell.n_neg < 1:
            raise DataError(f"synthetic group {cell.label!r} has an empty label cell")
        scores.append(rng.beta(cell.pos.a, cell.pos.b, size=cell.n_pos))
        scores.append(rng.beta(cell.neg.a, cell.neg.b, size=cell.n_neg))
        groups.append(np.full(cell.n_pos + cell.n_neg, g, dtype=np.int64))
        labels.append(np.ones(cell.n_pos, dtype=np.int64))
        labels.append(np.zeros(cell.n_neg, dtype=np.int64))

    order = rng.permutation(sum(len(s) for s in scores))
    data = Dataset.from_arrays(
        scores=np.concatenate(scores)[order],
        groups=np.concatenate(groups)[order],
        labels=np.concatenate(labels)[order],
        group_count=len(spec.groups),
        group_names=tuple(cell.label for cell in spec.groups),
    )
    logger.info("Generated %d synthetic rows over %d group(s)", len(data), len(spec.groups))
    return data


def population_roc(cell: SynthGroupConfig, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Population (TPR, FPR) of the rule score >= t for one synthetic group."""
    tpr = stats.beta.sf(thresholds, cell.pos.a, cell.pos.b)
    fpr = stats.beta.sf(thresholds, cell.neg.a, cell.neg.b)
    return tpr, fpr


def population_auc(pos: BetaParams, neg: BetaParams) -> float:
    """Pr(S_pos > S_neg) for independent Beta scores, by quadrature."""
    value, _ = integrate.quad(
        lambda s: stats.beta.pdf(s, pos.a, pos.b) * stats.beta.cdf(s, neg.a, neg.b), 0.0, 1.0
    )
    return float(value)

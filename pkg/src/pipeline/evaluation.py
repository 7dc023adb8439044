"""Accuracy, disparity and intervention metrics from confusion counts."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, Field

from src.config import ConstraintsConfig, RegionConfig
from src.data.dataset import Dataset, group_stats
from src.errors import DenominatorError
from src.pipeline.constraints import (
    REPORTED_METRICS,
    ConstraintSpec,
    LossSpec,
    Metric,
    builtin_specs,
    disparities,
    loss as loss_value,
    misclassification_loss,
    specs_from_config,
)
from src.pipeline.construct import Recipe, predict_batch, threshold_recipe
from src.pipeline.region import GuardResult, TargetRates, feasibility_guard
from src.pipeline.roc import build_hulls

logger = logging.getLogger(__name__)


class GroupConfusion(BaseModel):
    name: str
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def metric(self, metric: Metric) -> float | None:
        """Group value of a reported metric; None when its denominator is empty."""
        num, den = {
            Metric.DP: (self.tp + self.fp, self.n),
            Metric.EOPP: (self.tp, self.tp + self.fn),
            Metric.PEQ: (self.fp, self.fp + self.tn),
            Metric.PP: (self.tp, self.tp + self.fp),
            Metric.FOR: (self.fn, self.fn + self.tn),
        }[metric]
        return num / den if den else None


class EvalReport(BaseModel):
    n: int
    accuracy: float
    gaps: dict[str, float | None]
    values: dict[str, list[float | None]]
    undefined: list[str] = Field(default_factory=list)
    intervention_expected: float | None = None
    intervention_sampled: float = 0.0
    alpha: float | None = None
    triggered: bool | None = None
    confusion: list[GroupConfusion]


def confusion_counts(data: Dataset, predictions: np.ndarray) -> list[GroupConfusion]:
    out = []
    for g, name in enumerate(data.group_names):
        mask = data.group_mask(g)
        y = data.labels[mask]
        f = predictions[mask]
        out.append(
            GroupConfusion(
                name=name,
                tp=int(np.sum((f == 1) & (y == 1))),
                fp=int(np.sum((f == 1) & (y == 0))),
                tn=int(np.sum((f == 0) & (y == 0))),
                fn=int(np.sum((f == 0) & (y == 1))),
            )
        )
    return out


def report_from_counts(
    confusion: Sequence[GroupConfusion],
    intervention_sampled: float = 0.0,
    intervention_expected: float | None = None,
    guard: GuardResult | None = None,
) -> EvalReport:
    present = [c for c in confusion if c.n > 0]
    total = sum(c.n for c in present)
    correct = sum(c.tp + c.tn for c in present)

    gaps: dict[str, float | None] = {}
    values: dict[str, list[float | None]] = {}
    undefined: list[str] = []
    for metric in REPORTED_METRICS:
        per_group = [c.metric(metric) for c in present]
        values[metric.value] = per_group
        defined = [v for v in per_group if v is not None]
        for c, v in zip(present, per_group):
            if v is None:
                undefined.append(f"{metric.value}:{c.name}")
        gaps[metric.value] = max(defined) - min(defined) if defined else None

    if undefined:
        logger.warning("Undefined metric values on evaluation data: %s", ", ".join(undefined))
    return EvalReport(
        n=total,
        accuracy=correct / total if total else float("nan"),
        gaps=gaps,
        values=values,
        undefined=undefined,
        intervention_expected=intervention_expected,
        intervention_sampled=intervention_sampled,
        alpha=guard.alpha if guard else None,
        triggered=guard.triggered if guard else None,
        confusion=list(confusion),
    )


def evaluate_recipe(
    recipe: Recipe, data: Dataset, seed: int, guard: GuardResult | None = None
) -> EvalReport:
    """Sample the recipe once per row and score the predictions."""
    batch = predict_batch(recipe, data, seed)
    sampled = float(batch.intervened.mean()) if len(data) else 0.0
    return report_from_counts(
        confusion_counts(data, batch.final),
        intervention_sampled=sampled,
        intervention_expected=recipe.expected_intervention,
        guard=guard,
    )


def evaluate_baseline(data: Dataset, threshold: float = 0.5) -> EvalReport:
    """The unconstrained rule score >= threshold in every group."""
    recipe = threshold_recipe([threshold] * data.group_count, data.group_names)
    return evaluate_recipe(recipe, data, seed=0)


class OracleReport(BaseModel):
    accuracy: float
    objective: float
    alpha: float
    triggered: bool
    tpr: list[float]
    fpr: list[float]
    gaps: dict[str, float]


def implied_accuracy(data: Dataset, target: TargetRates) -> float:
    return 1.0 - loss_value(misclassification_loss(group_stats(data)), target.rates)


def _target_gaps(specs: Sequence[ConstraintSpec], rates) -> dict[str, float]:
    gaps = {}
    for spec in specs:
        try:
            gaps.update(disparities([spec], rates).gaps)
        except DenominatorError:
            logger.warning("%s undefined at the oracle rates", spec.label)
    return gaps


def oracle_rates(
    data: Dataset,
    constraints: ConstraintsConfig,
    region: RegionConfig = RegionConfig(),
    loss: LossSpec | None = None,
) -> tuple[GuardResult, OracleReport]:
    """Guarded region search run directly on ``data`` (normally TEST)."""
    stats = group_stats(data)
    specs = specs_from_config(constraints, stats)
    loss = loss if loss is not None else misclassification_loss(stats)
    hulls = build_hulls(data)
    guard = feasibility_guard(hulls, specs, loss, region)
    target = guard.target

    report_specs = builtin_specs({m.value: 1.0 for m in REPORTED_METRICS}, stats, constraints.epsilon)
    gaps = _target_gaps(report_specs, target.rates)
    report = OracleReport(
        accuracy=implied_accuracy(data, target),
        objective=target.objective,
        alpha=guard.alpha,
        triggered=guard.triggered,
        tpr=[r.tpr for r in target.rates],
        fpr=[r.fpr for r in target.rates],
        gaps=gaps,
    )
    logger.info("Oracle accuracy %.4f (alpha=%.4g)", report.accuracy, guard.alpha)
    return guard, report

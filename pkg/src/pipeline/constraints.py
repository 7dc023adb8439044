"""Linear and linear-fractional group performance functions.

A metric G_a is written through the lifted rates rho_a = (TPR_a, FPR_a, 1):

    G_a = <u_a, rho_a> / <v_a, rho_a>

Linear metrics use v_a = (0, 0, 1). Coefficients of the built-in metrics are
instantiated with the plug-in prevalence pi_a of each group.
"""

from __future__ import annotations

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from src.config import ConstraintsConfig, LossConfig
from src.data.dataset import GroupStats
from src.errors import DataError, DenominatorError
from src.pipeline.roc import RatePoint

logger = logging.getLogger(__name__)

LINEAR_V = np.array([0.0, 0.0, 1.0])


class Metric(str, Enum):
    DP = "DP"
    EOPP = "EOpp"
    PEQ = "PEq"
    PP = "PP"
    FOR = "FOR"
    ACC_PARITY = "AccParity"
    CUSTOM = "Custom"


class Kind(str, Enum):
    LINEAR = "linear"
    LINEAR_FRACTIONAL = "linear_fractional"


# Metrics every evaluation reports, whether constrained or not.
REPORTED_METRICS = (Metric.DP, Metric.EOPP, Metric.PEQ, Metric.PP, Metric.FOR)


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    metric: Metric
    kind: Kind
    u: np.ndarray  # (m, 3)
    v: np.ndarray  # (m, 3)
    delta: float
    epsilon: float = 1e-7
    label: str = ""

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if u.ndim != 2 or u.shape[1] != 3 or v.shape != u.shape:
            raise ValueError(f"coefficients must be (m, 3) arrays, got {u.shape} and {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("coefficients must be finite")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        linear_v = bool(np.all(v == LINEAR_V))
        if linear_v != (self.kind is Kind.LINEAR):
            raise ValueError(f"{self.kind.value} constraint has inconsistent denominator rows")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        if not self.label:
            object.__setattr__(self, "label", self.metric.value)

    @property
    def group_count(self) -> int:
        return len(self.u)

    @property
    def is_fractional(self) -> bool:
        return self.kind is Kind.LINEAR_FRACTIONAL

    def relaxed(self, alpha: float) -> "ConstraintSpec":
        """Copy with tolerance alpha * delta, capped at 1."""
        return replace(self, delta=min(1.0, alpha * self.delta))


@dataclass(frozen=True, eq=False)
class LossSpec:
    gamma: np.ndarray  # (m, 3)

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=float)
        if gamma.ndim != 2 or gamma.shape[1] != 3:
            raise ValueError(f"gamma must be an (m, 3) array, got {gamma.shape}")
        if not np.all(np.isfinite(gamma)):
            raise ValueError("gamma must be finite")
        object.__setattr__(self, "gamma", gamma)


@dataclass
class DisparityReport:
    gaps: dict[str, float] = field(default_factory=dict)
    values: dict[str, list[float]] = field(default_factory=dict)


def _lifted(rate: RatePoint) -> np.ndarray:
    return np.array([rate.tpr, rate.fpr, 1.0])


def builtin_spec(
    metric: Metric | str, stats: GroupStats, delta: float, epsilon: float = 1e-7
) -> ConstraintSpec:
    try:
        metric = Metric(metric)
    except ValueError:
        available = ", ".join(m.value for m in Metric if m is not Metric.CUSTOM)
        raise KeyError(f"Unknown metric: {metric}. Available: {available}") from None

    pi = stats.prevalence
    zeros = np.zeros_like(pi)
    ones = np.ones_like(pi)
    linear_v = np.tile(LINEAR_V, (len(pi), 1))

    if metric is Metric.DP:
        u, v = np.column_stack([pi, 1 - pi, zeros]), linear_v
    elif metric is Metric.EOPP:
        u, v = np.column_stack([ones, zeros, zeros]), linear_v
    elif metric is Metric.PEQ:
        u, v = np.column_stack([zeros, ones, zeros]), linear_v
    elif metric is Metric.PP:
        u = np.column_stack([pi, zeros, zeros])
        v = np.column_stack([pi, 1 - pi, zeros])
    elif metric is Metric.FOR:
        u = np.column_stack([-pi, zeros, pi])
        v = np.column_stack([-pi, -(1 - pi), ones])
    elif metric is Metric.ACC_PARITY:
        u, v = np.column_stack([pi, -(1 - pi), 1 - pi]), linear_v
    else:
        raise KeyError("Custom metrics are built with custom_spec")

    kind = Kind.LINEAR_FRACTIONAL if metric in (Metric.PP, Metric.FOR) else Kind.LINEAR
    return ConstraintSpec(metric=metric, kind=kind, u=u, v=v, delta=delta, epsilon=epsilon)


def expand_metrics(metrics: Mapping[str, float]) -> dict[str, float]:
    """``EO`` becomes the EOpp/PEq pair; a metric named twice keeps the tighter tolerance."""
    deltas: dict[str, float] = {}
    for name, delta in metrics.items():
        for member in ("EOpp", "PEq") if name == "EO" else (name,):
            deltas[member] = min(delta, deltas.get(member, delta))
    return deltas


def builtin_specs(
    metrics: Mapping[str, float], stats: GroupStats, epsilon: float = 1e-7
) -> list[ConstraintSpec]:
    """Specs for a {metric: delta} mapping in declaration order."""
    return [
        builtin_spec(name, stats, delta, epsilon)
        for name, delta in expand_metrics(metrics).items()
    ]


def custom_spec(
    label: str,
    u: Sequence[Sequence[float]],
    v: Sequence[Sequence[float]] | None,
    delta: float,
    epsilon: float = 1e-7,
) -> ConstraintSpec:
    u = np.asarray(u, dtype=float)
    v = np.tile(LINEAR_V, (len(u), 1)) if v is None else np.asarray(v, dtype=float)
    kind = Kind.LINEAR if np.all(v == LINEAR_V) else Kind.LINEAR_FRACTIONAL
    return ConstraintSpec(
        metric=Metric.CUSTOM, kind=kind, u=u, v=v, delta=delta, epsilon=epsilon, label=label
    )


def specs_from_config(cfg: ConstraintsConfig, stats: GroupStats) -> list[ConstraintSpec]:
    specs = builtin_specs(cfg.metrics, stats, cfg.epsilon)
    for custom in cfg.custom:
        if len(custom.u) != stats.group_count:
            raise DataError(
                f"custom constraint {custom.label!r} has {len(custom.u)} coefficient rows "
                f"for {stats.group_count} groups"
            )
        specs.append(custom_spec(custom.label, custom.u, custom.v, custom.delta, cfg.epsilon))
    logger.info(
        "Active constraints: %s",
        ", ".join(f"{s.label}(delta={s.delta:g}, {s.kind.value})" for s in specs) or "none",
    )
    return specs


def misclassification_loss(stats: GroupStats) -> LossSpec:
    """gamma_a = (-p_a pi_a, p_a (1 - pi_a), p_a pi_a), so loss = Pr(f != Y)."""
    p = stats.proportion
    pi = stats.prevalence
    return LossSpec(gamma=np.column_stack([-p * pi, p * (1 - pi), p * pi]))


def loss_from_config(cfg: LossConfig, stats: GroupStats) -> LossSpec:
    if cfg.gamma is None:
        return misclassification_loss(stats)
    if len(cfg.gamma) != stats.group_count:
        raise DataError(f"loss has {len(cfg.gamma)} coefficient rows for {stats.group_count} groups")
    logger.info("Using configured cost-sensitive loss")
    return LossSpec(gamma=np.asarray(cfg.gamma, dtype=float))


def evaluate(spec: ConstraintSpec, group: int, rate: RatePoint) -> float:
    rho = _lifted(rate)
    numerator = float(spec.u[group] @ rho)
    if spec.kind is Kind.LINEAR:
        return numerator
    denominator = float(spec.v[group] @ rho)
    if denominator < spec.epsilon:
        raise DenominatorError(
            f"{spec.label}: denominator {denominator:.3g} below epsilon {spec.epsilon:g} "
            f"in group {group}"
        )
    return numerator / denominator


def loss(spec: LossSpec, rates: Sequence[RatePoint]) -> float:
    if len(rates) != len(spec.gamma):
        raise ValueError(f"expected rates for {len(spec.gamma)} groups, got {len(rates)}")
    return float(sum(spec.gamma[a] @ _lifted(r) for a, r in enumerate(rates)))


def disparities(specs: Sequence[ConstraintSpec], rates: Sequence[RatePoint]) -> DisparityReport:
    report = DisparityReport()
    for spec in specs:
        values = [evaluate(spec, a, r) for a, r in enumerate(rates)]
        report.values[spec.label] = values
        report.gaps[spec.label] = max(values) - min(values)
    return report


def equalized_odds_gap(report: DisparityReport) -> float:
    return max(report.gaps[Metric.EOPP.value], report.gaps[Metric.PEQ.value])

"""Randomized post-processors that attain target rates with minimal intervention.

The base classifier of a group mixes the threshold rules of two adjacent hull
supports (weight theta on the later one). A mechanism then randomizes its
output:

  anti-diagonal  with probability lam replace the base label by Bernoulli(p)
  label-flipping predict Bernoulli(p1) when the base says 1, Bernoulli(p0) otherwise

Expected intervention is the probability that the final label differs from
the base label. For each group we search edges and theta for the cheapest
feasible parameters; a target on the hull boundary needs none.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field

from src.config import ConstructConfig, MechanismKind
from src.data.dataset import Dataset, ScoredSample
from src.errors import ConstructionInfeasibleError, DataError, DegenerateBaseError
from src.pipeline.roc import GroupHull, select
from src.pipeline.region import TargetRates

logger = logging.getLogger(__name__)

CLAMP_TOL = 1e-9
SINGULAR_TOL = 1e-12
INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI_SQUARE = (3 - math.sqrt(5)) / 2


@dataclass(frozen=True)
class BaseOperatingPoint:
    fnr: float
    fpr: float
    s_plus: float


class MechanismParams(BaseModel):
    variant: MechanismKind
    lam: float | None = None
    p: float | None = None
    p0: float | None = None
    p1: float | None = None

    model_config = {"frozen": True}

    @classmethod
    def anti_diagonal(cls, lam: float, p: float) -> "MechanismParams":
        return cls(variant=MechanismKind.ANTI_DIAGONAL, lam=lam, p=p)

    @classmethod
    def label_flipping(cls, p0: float, p1: float) -> "MechanismParams":
        return cls(variant=MechanismKind.LABEL_FLIPPING, p0=p0, p1=p1)

    @classmethod
    def identity(cls, variant: MechanismKind) -> "MechanismParams":
        if variant is MechanismKind.ANTI_DIAGONAL:
            return cls.anti_diagonal(0.0, 0.5)
        return cls.label_flipping(0.0, 1.0)


class ThresholdRule(BaseModel):
    """Inclusive rule score >= threshold; ``None`` predicts 0 for every score.

    With ``tie_cut`` set, samples scored exactly ``threshold`` are selected
    only when their row id is at most the cut.
    """

    threshold: float | None = None
    tie_cut: int | None = None

    model_config = {"frozen": True}

    @property
    def above_all(self) -> bool:
        return self.threshold is None

    def predicts(self, scores: np.ndarray, row_ids: np.ndarray | None = None) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        if self.threshold is None:
            return np.zeros(scores.shape, dtype=bool)
        return select(scores, row_ids, self.threshold, self.tie_cut)


class GroupRecipe(BaseModel):
    group: int
    name: str
    edge_start: ThresholdRule
    edge_end: ThresholdRule
    edge_index: int = 0
    theta: float = Field(default=0.0, ge=0.0, le=1.0)
    mechanism: MechanismParams
    base_fnr: float | None = None
    base_fpr: float | None = None
    base_s_plus: float | None = None
    target_fnr: float | None = None
    target_fpr: float | None = None
    requested_fnr: float | None = None
    requested_fpr: float | None = None
    snapped: bool = False
    expected_intervention: float = 0.0

    @property
    def base(self) -> BaseOperatingPoint | None:
        if self.base_fnr is None or self.base_fpr is None or self.base_s_plus is None:
            return None
        return BaseOperatingPoint(self.base_fnr, self.base_fpr, self.base_s_plus)

    def expected_rates(self) -> tuple[float, float] | None:
        """(fnr, fpr) implied by the stored base point and mechanism."""
        base = self.base
        if base is None:
            return None
        return forward_rates(base, self.mechanism)


class Recipe(BaseModel):
    mechanism: MechanismKind
    groups: list[GroupRecipe]
    seed: int = 0
    config_hash: str = ""
    expected_intervention: float = 0.0

    def group_by_name(self, name: str) -> GroupRecipe:
        for entry in self.groups:
            if entry.name == name:
                return entry
        available = ", ".join(g.name for g in self.groups)
        raise DataError(f"group {name!r} not covered by recipe. Available: {available}")

    def group_by_index(self, group: int) -> GroupRecipe:
        for entry in self.groups:
            if entry.group == group:
                return entry
        raise DataError(f"group {group} not covered by recipe")

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Recipe":
        return cls.model_validate_json(text)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Recipe":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def edge_point(hull: GroupHull, edge: tuple[int, int], theta: float) -> BaseOperatingPoint:
    h, h_next = edge
    if h_next != h + 1 or h < 0 or h_next >= len(hull.supports):
        raise ValueError(f"edge {edge} is not a pair of adjacent hull supports")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    a, b = hull.supports[h], hull.supports[h_next]
    return BaseOperatingPoint(
        fnr=(1 - theta) * a.fnr + theta * b.fnr,
        fpr=(1 - theta) * a.fpr + theta * b.fpr,
        s_plus=(1 - theta) * a.selection_rate + theta * b.selection_rate,
    )


def _unit(value: float) -> float | None:
    if -CLAMP_TOL <= value < 0.0:
        return 0.0
    if 1.0 < value <= 1.0 + CLAMP_TOL:
        return 1.0
    return value if 0.0 <= value <= 1.0 else None


def anti_diagonal_params(
    base: BaseOperatingPoint, target: tuple[float, float]
) -> MechanismParams | None:
    """Closed-form (lam, p) moving ``base`` toward (p, p); None when infeasible.

    ``target`` is (fnr, fpr).
    """
    t_fnr, t_fpr = target
    base_sum = base.fpr + base.fnr
    if abs(1.0 - base_sum) <= SINGULAR_TOL:
        raise DegenerateBaseError(f"base point has FPR + FNR = 1 ({base.fpr}, {base.fnr})")
    lam = (t_fpr + t_fnr - base_sum) / (1.0 - base_sum)
    if abs(lam) <= SINGULAR_TOL:
        if abs(t_fnr - base.fnr) <= CLAMP_TOL and abs(t_fpr - base.fpr) <= CLAMP_TOL:
            return MechanismParams.anti_diagonal(0.0, 0.5)
        return None
    lam_c = _unit(lam)
    if lam_c is None:
        return None
    p = _unit((t_fpr - (1.0 - lam) * base.fpr) / lam)
    if p is None:
        return None
    return MechanismParams.anti_diagonal(lam_c, p)


def label_flipping_params(
    base: BaseOperatingPoint, target: tuple[float, float]
) -> MechanismParams | None:
    t_fnr, t_fpr = target
    det = base.fpr + base.fnr - 1.0
    if abs(det) <= SINGULAR_TOL:
        raise DegenerateBaseError(f"label-flipping system is singular at ({base.fpr}, {base.fnr})")
    p1 = _unit((t_fpr * base.fnr - (1.0 - t_fnr) * (1.0 - base.fpr)) / det)
    p0 = _unit(((1.0 - t_fnr) * base.fpr - t_fpr * (1.0 - base.fnr)) / det)
    if p1 is None or p0 is None:
        return None
    return MechanismParams.label_flipping(p0, p1)


def anti_diagonal_rates(base: BaseOperatingPoint, lam: float, p: float) -> tuple[float, float]:
    return (1 - lam) * base.fnr + lam * (1 - p), (1 - lam) * base.fpr + lam * p


def label_flipping_rates(base: BaseOperatingPoint, p0: float, p1: float) -> tuple[float, float]:
    tpr = p1 * (1 - base.fnr) + p0 * base.fnr
    return 1 - tpr, p1 * base.fpr + p0 * (1 - base.fpr)


def forward_rates(base: BaseOperatingPoint, params: MechanismParams) -> tuple[float, float]:
    if params.variant is MechanismKind.ANTI_DIAGONAL:
        return anti_diagonal_rates(base, params.lam, params.p)
    return label_flipping_rates(base, params.p0, params.p1)


def expected_intervention(base: BaseOperatingPoint, params: MechanismParams) -> float:
    s = base.s_plus
    if params.variant is MechanismKind.ANTI_DIAGONAL:
        return params.lam * (s * (1 - params.p) + (1 - s) * params.p)
    return s * (1 - params.p1) + (1 - s) * params.p0


def golden_section(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-5, max_iter: int = 40
) -> tuple[float, float]:
    """Minimise a unimodal ``f`` on [lo, hi]; returns the best evaluated (x, f(x))."""
    lo, hi = min(lo, hi), max(lo, hi)
    best = min(((lo, f(lo)), (hi, f(hi))), key=lambda pair: pair[1])
    h = hi - lo
    if h <= tol:
        return best

    c = lo + INV_PHI_SQUARE * h
    d = lo + INV_PHI * h
    yc, yd = f(c), f(d)
    for _ in range(max_iter):
        if h <= tol:
            break
        if yc < yd:
            hi, d, yd = d, c, yc
            h = INV_PHI * h
            c = lo + INV_PHI_SQUARE * h
            yc = f(c)
        else:
            lo, c, yc = c, d, yd
            h = INV_PHI * h
            d = lo + INV_PHI * h
            yd = f(d)
        for x, y in ((c, yc), (d, yd)):
            if y < best[1]:
                best = (x, y)
    return best


def _params_for(variant: MechanismKind) -> Callable[..., MechanismParams | None]:
    if variant is MechanismKind.ANTI_DIAGONAL:
        return anti_diagonal_params
    return label_flipping_params


@dataclass(frozen=True)
class _Choice:
    edge: int
    theta: float
    params: MechanismParams
    base: BaseOperatingPoint
    intervention: float
    snapped: bool = False


def _snap(hull: GroupHull, target: tuple[float, float], xi: float) -> tuple[int, float] | None:
    """Nearest upper-hull point when it lies within xi/n0 in FPR and xi/n1 in FNR."""
    t_fnr, t_fpr = target
    # Count units: one sample of each class moves the point by one unit on its axis.
    px, py = t_fpr * hull.n_neg, (1 - t_fnr) * hull.n_pos
    best: tuple[float, int, float] | None = None
    for h in range(hull.edge_count):
        a, b = hull.supports[h], hull.supports[h + 1]
        ax, ay = a.fp, a.tp
        ex, ey = b.fp - a.fp, b.tp - a.tp
        theta = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        theta = min(1.0, max(0.0, theta))
        dx, dy = ax + theta * ex - px, ay + theta * ey - py
        dist = dx * dx + dy * dy
        if best is None or dist < best[0]:
            best = (dist, h, theta)
    if best is None:
        return None
    _, h, theta = best
    a, b = hull.supports[h], hull.supports[h + 1]
    dx = abs(a.fp + theta * (b.fp - a.fp) - px)
    dy = abs(a.tp + theta * (b.tp - a.tp) - py)
    if dx <= xi and dy <= xi:
        return h, theta
    return None


def _feasible_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    start = None
    for i, ok in enumerate(mask):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def _boundary(feasible: Callable[[float], bool], inside: float, outside: float, tol: float) -> float:
    """Bisect toward the edge of a feasible run; returns a feasible theta."""
    for _ in range(60):
        if abs(outside - inside) <= tol * 1e-2:
            break
        mid = (inside + outside) / 2
        if feasible(mid):
            inside = mid
        else:
            outside = mid
    return inside


def _search_edge(
    hull: GroupHull,
    h: int,
    target: tuple[float, float],
    mechanism: MechanismKind,
    cfg: ConstructConfig,
) -> _Choice | None:
    params_for = _params_for(mechanism)
    cache: dict[float, tuple[MechanismParams, BaseOperatingPoint] | None] = {}

    def evaluate(theta: float):
        if theta not in cache:
            base = edge_point(hull, (h, h + 1), theta)
            try:
                params = params_for(base, target)
            except DegenerateBaseError:
                params = None
            cache[theta] = None if params is None else (params, base)
        return cache[theta]

    def objective(theta: float) -> float:
        found = evaluate(theta)
        return math.inf if found is None else expected_intervention(found[1], found[0])

    grid = np.linspace(0.0, 1.0, cfg.coarse_points)
    mask = np.array([evaluate(float(t)) is not None for t in grid])
    best: tuple[float, float] | None = None
    for i0, i1 in _feasible_runs(mask):
        lo, hi = float(grid[i0]), float(grid[i1])
        if i0 > 0:
            lo = _boundary(lambda t: evaluate(t) is not None, lo, float(grid[i0 - 1]), cfg.golden_tol)
        if i1 < len(grid) - 1:
            hi = _boundary(lambda t: evaluate(t) is not None, hi, float(grid[i1 + 1]), cfg.golden_tol)
        candidates = [golden_section(objective, lo, hi, cfg.golden_tol, cfg.golden_max_iter)]
        candidates += [(float(t), objective(float(t))) for t in grid[i0 : i1 + 1]]
        candidates += [(lo, objective(lo)), (hi, objective(hi))]
        for theta, value in candidates:
            if value < math.inf and (best is None or value < best[1]):
                best = (theta, value)
    if best is None:
        return None
    theta, value = best
    params, base = evaluate(theta)
    return _Choice(edge=h, theta=theta, params=params, base=base, intervention=value)


def min_intervention(
    hull: GroupHull,
    target: tuple[float, float],
    mechanism: MechanismKind,
    cfg: ConstructConfig = ConstructConfig(),
) -> _Choice:
    """Cheapest (edge, theta, params) for one group; ``target`` is (fnr, fpr)."""
    snapped = _snap(hull, target, cfg.snap_xi)
    if snapped is not None:
        h, theta = snapped
        base = edge_point(hull, (h, h + 1), theta)
        return _Choice(
            edge=h,
            theta=theta,
            params=MechanismParams.identity(mechanism),
            base=base,
            intervention=0.0,
            snapped=True,
        )

    best: _Choice | None = None
    for h in range(hull.edge_count):
        choice = _search_edge(hull, h, target, mechanism, cfg)
        if choice is not None and (best is None or choice.intervention < best.intervention):
            best = choice
    if best is None:
        raise ConstructionInfeasibleError(hull.group, target[0], target[1])
    return best


def _rule(hull: GroupHull, index: int) -> ThresholdRule:
    support = hull.supports[index]
    return ThresholdRule(threshold=support.threshold, tie_cut=support.tie_cut)


def construct_recipe(
    hulls: Sequence[GroupHull],
    target: TargetRates,
    cfg: ConstructConfig = ConstructConfig(),
    group_names: Sequence[str] = (),
    seed: int = 0,
    config_hash: str = "",
) -> Recipe:
    """Build the per-group randomized post-processor for ``target``."""
    names = list(group_names) or [str(h.group) for h in hulls]
    total = sum(h.n for h in hulls)
    entries = []
    overall = 0.0
    for hull, rate in zip(hulls, target.rates):
        requested = (rate.fnr, rate.fpr)
        choice = min_intervention(hull, requested, cfg.mechanism, cfg)
        if choice.snapped:
            stored = (choice.base.fnr, choice.base.fpr)
        else:
            stored = forward_rates(choice.base, choice.params)
        entry = GroupRecipe(
            group=hull.group,
            name=names[hull.group],
            edge_start=_rule(hull, choice.edge),
            edge_end=_rule(hull, choice.edge + 1),
            edge_index=choice.edge,
            theta=choice.theta,
            mechanism=choice.params,
            base_fnr=choice.base.fnr,
            base_fpr=choice.base.fpr,
            base_s_plus=choice.base.s_plus,
            target_fnr=stored[0],
            target_fpr=stored[1],
            requested_fnr=requested[0],
            requested_fpr=requested[1],
            snapped=choice.snapped,
            expected_intervention=choice.intervention,
        )
        entries.append(entry)
        overall += choice.intervention * hull.n / total
        logger.info(
            "Group %s: edge %d theta=%.6f %s intervention=%.6f",
            entry.name,
            choice.edge,
            choice.theta,
            "snapped" if choice.snapped else cfg.mechanism.value,
            choice.intervention,
        )
    return Recipe(
        mechanism=cfg.mechanism,
        groups=entries,
        seed=seed,
        config_hash=config_hash,
        expected_intervention=overall,
    )


def threshold_recipe(
    thresholds: Sequence[float | None],
    group_names: Sequence[str],
    mechanism: MechanismKind = MechanismKind.ANTI_DIAGONAL,
) -> Recipe:
    """Deterministic group-wise threshold rule expressed as a recipe."""
    if len(thresholds) != len(group_names):
        raise ValueError("need one threshold per group")
    groups = [
        GroupRecipe(
            group=g,
            name=name,
            edge_start=ThresholdRule(threshold=t),
            edge_end=ThresholdRule(threshold=t),
            mechanism=MechanismParams.identity(mechanism),
        )
        for g, (t, name) in enumerate(zip(thresholds, group_names))
    ]
    return Recipe(mechanism=mechanism, groups=groups)


class PredictionStream:
    """Per-group uniform draws keyed by row id.

    Row r of group g reads (u_theta, u_coin, u_label) from row r of a
    PCG64 stream seeded by SeedSequence(seed, spawn_key=(g,)), so a sample's
    prediction does not depend on which other samples are predicted.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._draws: dict[int, np.ndarray] = {}

    def uniforms(self, group: int, row_ids: np.ndarray) -> np.ndarray:
        row_ids = np.asarray(row_ids, dtype=np.int64)
        needed = int(row_ids.max()) + 1 if len(row_ids) else 0
        draws = self._draws.get(group)
        if draws is None or len(draws) < needed:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(group,))))
            # Row-major fill: a longer draw extends a shorter one.
            draws = rng.random((max(needed, 1), 3))
            self._draws[group] = draws
        return draws[row_ids]


def _apply(
    entry: GroupRecipe, scores: np.ndarray, row_ids: np.ndarray, u: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    use_end = u[:, 0] < entry.theta
    base = np.where(
        use_end, entry.edge_end.predicts(scores, row_ids), entry.edge_start.predicts(scores, row_ids)
    )
    params = entry.mechanism
    if params.variant is MechanismKind.ANTI_DIAGONAL:
        final = np.where(u[:, 1] < params.lam, u[:, 2] < params.p, base)
    else:
        final = np.where(base, u[:, 2] < params.p1, u[:, 2] < params.p0)
    return final.astype(np.int64), base.astype(np.int64)


def predict(recipe: Recipe, sample: ScoredSample, row_id: int, stream: PredictionStream) -> int:
    entry = recipe.group_by_index(sample.group)
    rows = np.array([row_id])
    u = stream.uniforms(entry.group, rows)
    final, _ = _apply(entry, np.array([sample.score]), rows, u)
    return int(final[0])


@dataclass(frozen=True, eq=False)
class PredictionBatch:
    final: np.ndarray
    base: np.ndarray

    @property
    def intervened(self) -> np.ndarray:
        return self.final != self.base


def predict_batch(recipe: Recipe, data: Dataset, seed: int) -> PredictionBatch:
    """Predictions for every row; identical to calling ``predict`` row by row."""
    stream = PredictionStream(seed)
    final = np.zeros(len(data), dtype=np.int64)
    base = np.zeros(len(data), dtype=np.int64)
    for g, name in enumerate(data.group_names):
        mask = data.group_mask(g)
        if not mask.any():
            continue
        entry = recipe.group_by_name(name)
        rows = data.row_ids[mask]
        u = stream.uniforms(entry.group, rows)
        final[mask], base[mask] = _apply(entry, data.scores[mask], rows, u)
    return PredictionBatch(final=final, base=base)

"""Optimal operating characteristics over the group ROC hulls.

For fixed centroids q_k of the linear-fractional constraints the problem is an
LP in the hull mixture weights lambda_{a,j}:

    minimize    sum_a <gamma_a, rho_a>,   rho_a = sum_j lambda_{a,j} r_a^(j)
    subject to  sum_j lambda_{a,j} = 1,  lambda >= 0
                |<u_l,a, rho_a> - q_l| <= delta_l / 2           (linear, q_l free)
                U - (q_k + delta_k/2) V <= 0 <= U - (q_k - delta_k/2) V
                V >= eps_k                                      (fractional)
                FPR_a >= eps                                    (when any fractional is active)

with U = <u_k,a, rho_a>, V = <v_k,a, rho_a>. The outer search sweeps a grid
of admissible centroids; the feasibility guard relaxes every tolerance by a
common factor alpha and bisects for the smallest feasible one.
"""

from __future__ import annotations

import itertools
import logging
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src.config import RegionConfig
from src.pipeline.constraints import ConstraintSpec, LossSpec, loss as loss_value
from src.pipeline.linprog import LpProblem, LpSolution, LpStatus, solve
from src.pipeline.roc import GroupHull, RatePoint

logger = logging.getLogger(__name__)

CENTROID_TOL = 1e-12
FPR_AXIS = np.array([0.0, 1.0, 0.0])


def admissible_interval(delta: float) -> tuple[float, float]:
    """Q = [delta/2, 1 - delta/2]; collapses to {0.5} once delta >= 1."""
    if delta < 0:
        raise ValueError(f"delta must be non-negative, got {delta}")
    if delta >= 1.0:
        return 0.5, 0.5
    return delta / 2, 1.0 - delta / 2


@dataclass(frozen=True, eq=False)
class CentroidGrid:
    axes: tuple[np.ndarray, ...] = ()
    labels: tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return int(np.prod([len(a) for a in self.axes])) if self.axes else 1

    def points(self) -> Iterator[tuple[float, ...]]:
        """Lexicographic over axes in constraint order; yields () when no axis exists."""
        for point in itertools.product(*self.axes):
            yield tuple(float(q) for q in point)


def make_grid(specs: Sequence[ConstraintSpec], cfg: RegionConfig = RegionConfig()) -> CentroidGrid:
    fractional = [s for s in specs if s.is_fractional]
    per_axis = cfg.single_lf_points if len(fractional) == 1 else cfg.multi_lf_points
    axes = []
    for spec in fractional:
        lo, hi = admissible_interval(spec.delta)
        axes.append(np.array([lo]) if lo == hi else np.linspace(lo, hi, per_axis))
    return CentroidGrid(axes=tuple(axes), labels=tuple(s.label for s in fractional))


@dataclass(frozen=True, eq=False)
class TargetRates:
    rates: tuple[RatePoint, ...]
    weights: tuple[np.ndarray, ...]
    q_fractional: tuple[float, ...]
    q_linear: tuple[float, ...]
    objective: float
    grid_index: int = 0

    @property
    def fnr(self) -> np.ndarray:
        return np.array([r.fnr for r in self.rates])

    @property
    def fpr(self) -> np.ndarray:
        return np.array([r.fpr for r in self.rates])


@dataclass(frozen=True)
class GridEvaluation:
    index: int
    q: tuple[float, ...]
    status: LpStatus
    objective: float


@dataclass
class SearchTrace:
    alpha: float
    feasible: bool
    evaluations: list[GridEvaluation] = field(default_factory=list)


def build_inner_lp(
    hulls: Sequence[GroupHull],
    specs: Sequence[ConstraintSpec],
    loss: LossSpec,
    q_fractional: Sequence[float],
) -> LpProblem:
    fractional = [s for s in specs if s.is_fractional]
    linear = [s for s in specs if not s.is_fractional]
    if len(q_fractional) != len(fractional):
        raise ValueError(
            f"expected {len(fractional)} fractional centroid(s), got {len(q_fractional)}"
        )
    for spec, q in zip(fractional, q_fractional):
        lo, hi = admissible_interval(spec.delta)
        if not lo - CENTROID_TOL <= q <= hi + CENTROID_TOL:
            raise ValueError(f"{spec.label}: centroid {q} outside admissible [{lo}, {hi}]")

    sizes = [len(h.supports) for h in hulls]
    starts = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    n_lambda = int(starts[-1])
    n = n_lambda + len(linear)

    def row(a: int, coeffs: np.ndarray) -> np.ndarray:
        out = np.zeros(n)
        out[starts[a] : starts[a + 1]] = hulls[a].lifted @ coeffs
        return out

    c = np.concatenate([hulls[a].lifted @ loss.gamma[a] for a in range(len(hulls))])
    c = np.concatenate([c, np.zeros(len(linear))])

    a_eq = np.zeros((len(hulls), n))
    for a in range(len(hulls)):
        a_eq[a, starts[a] : starts[a + 1]] = 1.0
    b_eq = np.ones(len(hulls))

    a_ub: list[np.ndarray] = []
    b_ub: list[float] = []
    for l, spec in enumerate(linear):
        for a in range(len(hulls)):
            value = row(a, spec.u[a])
            value[n_lambda + l] = -1.0
            a_ub += [value, -value]
            b_ub += [spec.delta / 2, spec.delta / 2]
    for spec, q in zip(fractional, q_fractional):
        for a in range(len(hulls)):
            num = row(a, spec.u[a])
            den = row(a, spec.v[a])
            a_ub += [num - (q + spec.delta / 2) * den, (q - spec.delta / 2) * den - num, -den]
            b_ub += [0.0, 0.0, -spec.epsilon]
    if fractional:
        eps = min(s.epsilon for s in fractional)
        for a in range(len(hulls)):
            a_ub.append(-row(a, FPR_AXIS))
            b_ub.append(-eps)

    names = [f"lam[{h.group},{j}]" for h in hulls for j in range(len(h.supports))]
    names += [f"q[{s.label}]" for s in linear]
    bounds = [(0.0, None)] * n_lambda + [(None, None)] * len(linear)
    return LpProblem.build(
        c,
        a_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        a_eq=a_eq,
        b_eq=b_eq,
        bounds=bounds,
        names=names,
    )


def _decode(
    hulls: Sequence[GroupHull],
    solution: LpSolution,
    q_fractional: tuple[float, ...],
    n_linear: int,
    grid_index: int,
) -> TargetRates:
    x = solution.x
    weights = []
    rates = []
    start = 0
    for hull in hulls:
        k = len(hull.supports)
        lam = np.clip(x[start : start + k], 0.0, None)
        lam = lam / lam.sum()
        start += k
        rho = lam @ hull.lifted
        weights.append(lam)
        rates.append(RatePoint(tpr=float(rho[0]), fpr=float(rho[1])))
    q_linear = tuple(float(q) for q in x[start : start + n_linear])
    return TargetRates(
        rates=tuple(rates),
        weights=tuple(weights),
        q_fractional=q_fractional,
        q_linear=q_linear,
        objective=solution.objective,
        grid_index=grid_index,
    )


def region_search(
    hulls: Sequence[GroupHull],
    specs: Sequence[ConstraintSpec],
    loss: LossSpec,
    grid: CentroidGrid,
    trace: SearchTrace | None = None,
) -> TargetRates | None:
    """Best inner-LP solution over the centroid grid, or None if every point is infeasible.

    Ties keep the earliest grid point.
    """
    n_linear = sum(1 for s in specs if not s.is_fractional)
    best: tuple[int, tuple[float, ...], LpSolution] | None = None
    infeasible = 0
    for index, q in enumerate(grid.points()):
        solution = solve(build_inner_lp(hulls, specs, loss, q))
        if trace is not None:
            trace.evaluations.append(GridEvaluation(index, q, solution.status, solution.objective))
        if not solution.optimal:
            infeasible += 1
            logger.debug("Grid point %d q=%s: %s", index, q, solution.status.value)
            continue
        if best is None or solution.objective < best[2].objective:
            best = (index, q, solution)

    logger.debug("Region search: %d/%d grid points infeasible", infeasible, grid.size)
    if best is None:
        return None
    index, q, solution = best
    return _decode(hulls, solution, q, n_linear, index)


def baseline_vertices(hulls: Sequence[GroupHull], loss: LossSpec) -> list[int]:
    """Per group, the first hull vertex minimising <gamma_a, r>."""
    return [int(np.argmin(h.lifted @ loss.gamma[h.group])) for h in hulls]


def baseline_rates(hulls: Sequence[GroupHull], loss: LossSpec) -> list[RatePoint]:
    return [
        RatePoint(tpr=h.supports[j].tpr, fpr=h.supports[j].fpr)
        for h, j in zip(hulls, baseline_vertices(hulls, loss))
    ]


def baseline_disparities(
    specs: Sequence[ConstraintSpec], rates: Sequence[RatePoint]
) -> dict[str, float | None]:
    """Gap of each constraint at the baseline rates.

    Fractional metrics skip groups whose denominator is below epsilon; the gap
    is undefined (None) when fewer than two groups remain.
    """
    gaps: dict[str, float | None] = {}
    for spec in specs:
        values = []
        for a, rate in enumerate(rates):
            rho = rate.lifted()
            den = float(spec.v[a] @ rho)
            if spec.is_fractional and den < spec.epsilon:
                logger.warning(
                    "%s: baseline denominator %.3g below epsilon in group %d; skipped",
                    spec.label,
                    den,
                    a,
                )
                continue
            values.append(float(spec.u[a] @ rho) / den)
        gaps[spec.label] = max(values) - min(values) if len(values) >= 2 else None
    return gaps


def _one_hot_target(
    hulls: Sequence[GroupHull], vertices: Sequence[int], loss: LossSpec
) -> TargetRates:
    weights = []
    rates = []
    for hull, j in zip(hulls, vertices):
        lam = np.zeros(len(hull.supports))
        lam[j] = 1.0
        weights.append(lam)
        rates.append(RatePoint(tpr=hull.supports[j].tpr, fpr=hull.supports[j].fpr))
    return TargetRates(
        rates=tuple(rates),
        weights=tuple(weights),
        q_fractional=(),
        q_linear=(),
        objective=loss_value(loss, rates),
        grid_index=-1,
    )


@dataclass
class GuardResult:
    alpha: float
    target: TargetRates
    triggered: bool
    specs: list[ConstraintSpec]
    baseline_gaps: dict[str, float | None]
    alpha_hi: float = 1.0
    searches: int = 0
    traces: list[SearchTrace] = field(default_factory=list)


def _alpha_upper(
    specs: Sequence[ConstraintSpec], gaps: dict[str, float | None], cap: float
) -> float:
    alpha_hi = 1.0
    for spec in specs:
        gap = gaps[spec.label]
        if gap is None:
            logger.warning("%s: baseline gap undefined; alpha upper bound set to cap %g", spec.label, cap)
            return cap
        if spec.delta > 0:
            alpha_hi = max(alpha_hi, gap / spec.delta)
        elif gap > 0:
            return cap
    return min(alpha_hi, cap)


def feasibility_guard(
    hulls: Sequence[GroupHull],
    specs: Sequence[ConstraintSpec],
    loss: LossSpec,
    cfg: RegionConfig = RegionConfig(),
    record: bool = False,
) -> GuardResult:
    """Region search with the alpha-expansion fallback; always returns a target."""
    vertices = baseline_vertices(hulls, loss)
    baseline = [RatePoint(tpr=h.supports[j].tpr, fpr=h.supports[j].fpr) for h, j in zip(hulls, vertices)]
    gaps = baseline_disparities(specs, baseline)
    traces: list[SearchTrace] = []

    def search(alpha: float) -> tuple[TargetRates | None, list[ConstraintSpec]]:
        relaxed = [s.relaxed(alpha) for s in specs]
        grid = make_grid(relaxed, cfg)
        trace = SearchTrace(alpha=alpha, feasible=False) if record else None
        target = region_search(hulls, relaxed, loss, grid, trace)
        if trace is not None:
            trace.feasible = target is not None
            traces.append(trace)
        logger.debug("alpha=%.6g: %s", alpha, "feasible" if target else "infeasible")
        return target, relaxed

    target, relaxed = search(1.0)
    if target is not None:
        logger.info("Region search feasible at nominal tolerances (objective %.6g)", target.objective)
        return GuardResult(
            alpha=1.0,
            target=target,
            triggered=False,
            specs=relaxed,
            baseline_gaps=gaps,
            searches=1,
            traces=traces,
        )

    alpha_hi = max(_alpha_upper(specs, gaps, cfg.alpha_cap), 1.0 + cfg.tau_alpha)
    logger.warning("Nominal tolerances infeasible; bisecting alpha on [1, %.6g]", alpha_hi)
    searches = 1
    cached, cached_specs = search(alpha_hi)
    searches += 1
    if cached is None:
        logger.warning("Search infeasible at alpha=%.6g; falling back to baseline vertices", alpha_hi)
        cached = _one_hot_target(hulls, vertices, loss)
        cached_specs = [s.relaxed(alpha_hi) for s in specs]

    lo, hi = 1.0, alpha_hi
    while hi - lo > cfg.tau_alpha:
        mid = (lo + hi) / 2
        candidate, mid_specs = search(mid)
        searches += 1
        if candidate is not None:
            hi, cached, cached_specs = mid, candidate, mid_specs
        else:
            lo = mid

    logger.warning("Feasibility guard: alpha=%.6g after %d searches", hi, searches)
    return GuardResult(
        alpha=hi,
        target=cached,
        triggered=True,
        specs=cached_specs,
        baseline_gaps=gaps,
        alpha_hi=alpha_hi,
        searches=searches,
        traces=traces,
    )


def diagnostics_table(guard: GuardResult) -> pd.DataFrame:
    """One row per evaluated grid point: alpha, point index, centroids, LP status, objective."""
    labels = [s.label for s in guard.specs if s.is_fractional]
    rows = []
    for trace in guard.traces:
        for ev in trace.evaluations:
            entry = {"alpha": trace.alpha, "point": ev.index}
            entry.update({f"q_{label}": q for label, q in zip(labels, ev.q)})
            entry.update({"status": ev.status.value, "objective": ev.objective})
            rows.append(entry)
    columns = ["alpha", "point", *[f"q_{label}" for label in labels], "status", "objective"]
    return pd.DataFrame(rows, columns=columns)

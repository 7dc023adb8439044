"""Dense two-phase simplex for the small LPs of the region search.

    minimize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                lo <= x <= hi        (lo may be -inf, hi may be +inf)

Bounds are removed by substitution (x = lo + y, x = hi - y, or x = y+ - y-
for free variables). Phase one drives artificial variables of equality and
sign-flipped rows to zero; phase two optimises the real objective. Both phases
pivot by Bland's rule, so pivoting is deterministic and cannot cycle.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

FEAS_TOL = 1e-8
COST_TOL = 1e-9
PIVOT_TOL = 1e-11
MAX_PIVOTS = 50_000


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    # Final basis found but the solution misses a constraint by more than FEAS_TOL.
    NUMERICAL = "numerical"


def _as_matrix(a, n: int, what: str) -> np.ndarray:
    if a is None:
        return np.zeros((0, n))
    a = np.asarray(a, dtype=float)
    if a.ndim == 1 and a.size == 0:
        a = a.reshape(0, n)
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError(f"{what} must have {n} columns, got shape {a.shape}")
    return a


def _as_vector(b, rows: int, what: str) -> np.ndarray:
    b = np.zeros(0) if b is None else np.asarray(b, dtype=float).reshape(-1)
    if len(b) != rows:
        raise ValueError(f"{what} must have {rows} entries, got {len(b)}")
    return b


@dataclass(frozen=True, eq=False)
class LpProblem:
    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = len(c)
        a_ub = _as_matrix(self.a_ub, n, "A_ub")
        a_eq = _as_matrix(self.a_eq, n, "A_eq")
        b_ub = _as_vector(self.b_ub, len(a_ub), "b_ub")
        b_eq = _as_vector(self.b_eq, len(a_eq), "b_eq")
        lo = _as_vector(self.lo, n, "lower bounds")
        hi = _as_vector(self.hi, n, "upper bounds")
        for arr, what in ((c, "c"), (a_ub, "A_ub"), (b_ub, "b_ub"), (a_eq, "A_eq"), (b_eq, "b_eq")):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{what} has non-finite coefficients")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError("bounds must satisfy lo <= hi")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValueError("bounds exclude every value")
        if self.names and len(self.names) != n:
            raise ValueError(f"expected {n} variable names, got {len(self.names)}")
        for name, value in (
            ("c", c), ("a_ub", a_ub), ("b_ub", b_ub), ("a_eq", a_eq),
            ("b_eq", b_eq), ("lo", lo), ("hi", hi),
        ):
            object.__setattr__(self, name, value)

    @classmethod
    def build(
        cls,
        c,
        a_ub=None,
        b_ub=None,
        a_eq=None,
        b_eq=None,
        bounds: Sequence[tuple[float | None, float | None]] | None = None,
        names: Sequence[str] = (),
    ) -> "LpProblem":
        """Convenience constructor; ``None`` bounds are unbounded, default (0, None)."""
        n = len(np.asarray(c).reshape(-1))
        bounds = bounds if bounds is not None else [(0.0, None)] * n
        if len(bounds) != n:
            raise ValueError(f"expected {n} bounds, got {len(bounds)}")
        lo = [-np.inf if b[0] is None else b[0] for b in bounds]
        hi = [np.inf if b[1] is None else b[1] for b in bounds]
        return cls(c, a_ub, b_ub, a_eq, b_eq, np.array(lo, float), np.array(hi, float), tuple(names))

    @property
    def n_vars(self) -> int:
        return len(self.c)

    def residuals(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation at ``x``."""
        worst = 0.0
        if len(self.a_ub):
            worst = max(worst, float(np.max(self.a_ub @ x - self.b_ub)))
        if len(self.a_eq):
            worst = max(worst, float(np.max(np.abs(self.a_eq @ x - self.b_eq))))
        worst = max(worst, float(np.max(self.lo - x, initial=0.0)))
        return max(worst, float(np.max(x - self.hi, initial=0.0)))


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = float("nan")
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class _Standard:
    """Equality-form problem in y >= 0 with x = transform @ y + offset."""

    a: np.ndarray
    b: np.ndarray
    cost: np.ndarray
    transform: np.ndarray
    offset: np.ndarray
    needs_artificial: np.ndarray
    slack_of_row: list[int | None] = field(default_factory=list)


def _standardize(p: LpProblem) -> _Standard:
    n = p.n_vars
    columns: list[tuple[int, float]] = []
    offset = np.zeros(n)
    upper_rows: list[tuple[int, float]] = []
    for j in range(n):
        lo, hi = p.lo[j], p.hi[j]
        if np.isfinite(lo):
            offset[j] = lo
            columns.append((j, 1.0))
            if np.isfinite(hi):
                upper_rows.append((len(columns) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            columns.append((j, -1.0))
        else:
            columns.append((j, 1.0))
            columns.append((j, -1.0))

    transform = np.zeros((n, len(columns)))
    for k, (j, sign) in enumerate(columns):
        transform[j, k] = sign
    n_y = len(columns)

    a_ub = p.a_ub @ transform
    b_ub = p.b_ub - p.a_ub @ offset
    if upper_rows:
        extra = np.zeros((len(upper_rows), n_y))
        for r, (k, bound) in enumerate(upper_rows):
            extra[r, k] = 1.0
        a_ub = np.vstack([a_ub, extra])
        b_ub = np.concatenate([b_ub, [bound for _, bound in upper_rows]])
    a_eq = p.a_eq @ transform
    b_eq = p.b_eq - p.a_eq @ offset

    m_ub, m_eq = len(a_ub), len(a_eq)
    a = np.zeros((m_ub + m_eq, n_y + m_ub))
    a[:m_ub, :n_y] = a_ub
    a[:m_ub, n_y:] = np.eye(m_ub)
    a[m_ub:, :n_y] = a_eq
    b = np.concatenate([b_ub, b_eq])

    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0
    needs_artificial = flip.copy()
    needs_artificial[m_ub:] = True
    slack_of_row = [n_y + i if i < m_ub else None for i in range(m_ub + m_eq)]

    cost = np.concatenate([p.c @ transform, np.zeros(m_ub)])
    return _Standard(a, b, cost, transform, offset, needs_artificial, slack_of_row)


def _pivot(tableau: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    pivot_row = tableau[row].copy()
    column = tableau[:, col].copy()
    column[row] = 0.0
    tableau -= np.outer(column, pivot_row)


def _run(tableau: np.ndarray, basis: list[int], allowed: np.ndarray) -> tuple[LpStatus, int]:
    """Bland's rule on a tableau whose last row is [reduced costs | -objective]."""
    for pivots in range(MAX_PIVOTS):
        reduced = tableau[-1, :-1]
        entering = np.flatnonzero(allowed & (reduced < -COST_TOL))
        if len(entering) == 0:
            return LpStatus.OPTIMAL, pivots
        col = int(entering[0])

        column = tableau[:-1, col]
        candidates = np.flatnonzero(column > PIVOT_TOL)
        if len(candidates) == 0:
            return LpStatus.UNBOUNDED, pivots
        ratios = tableau[candidates, -1] / column[candidates]
        best = ratios.min()
        tied = candidates[ratios <= best + 1e-12 * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))

        _pivot(tableau, row, col)
        basis[row] = col
    raise RuntimeError(f"simplex did not terminate within {MAX_PIVOTS} pivots")


def _set_cost_row(tableau: np.ndarray, basis: list[int], cost: np.ndarray) -> None:
    body = tableau[:-1]
    c_basis = cost[basis]
    tableau[-1, :-1] = cost - c_basis @ body[:, :-1]
    tableau[-1, -1] = -(c_basis @ body[:, -1])


def solve(p: LpProblem) -> LpSolution:
    std = _standardize(p)
    m, n_cols = std.a.shape
    art_rows = np.flatnonzero(std.needs_artificial)
    n_art = len(art_rows)

    tableau = np.zeros((m + 1, n_cols + n_art + 1))
    tableau[:m, :n_cols] = std.a
    tableau[:m, -1] = std.b
    basis: list[int] = []
    art_col = {}
    for k, r in enumerate(art_rows):
        art_col[int(r)] = n_cols + k
        tableau[r, n_cols + k] = 1.0
    for r in range(m):
        basis.append(art_col[r] if r in art_col else std.slack_of_row[r])

    pivots = 0
    if n_art:
        phase_one_cost = np.concatenate([np.zeros(n_cols), np.ones(n_art)])
        _set_cost_row(tableau, basis, phase_one_cost)
        _, used = _run(tableau, basis, np.ones(n_cols + n_art, dtype=bool))
        pivots += used
        if -tableau[-1, -1] > FEAS_TOL:
            return LpSolution(LpStatus.INFEASIBLE, pivots=pivots)

        # Pivot remaining zero-level artificials out; rows with no real entry are redundant.
        keep = np.ones(m + 1, dtype=bool)
        for r in range(m):
            if basis[r] < n_cols:
                continue
            real = np.flatnonzero(np.abs(tableau[r, :n_cols]) > PIVOT_TOL)
            if len(real):
                _pivot(tableau, r, int(real[0]))
                basis[r] = int(real[0])
                pivots += 1
            else:
                keep[r] = False
        rows = np.flatnonzero(keep[:m])
        basis = [basis[r] for r in rows]
        tableau = np.vstack([tableau[rows][:, list(range(n_cols)) + [-1]], np.zeros(n_cols + 1)])
        a_kept = std.a[rows]
        b_kept = std.b[rows]
    else:
        a_kept, b_kept = std.a, std.b

    _set_cost_row(tableau, basis, std.cost)
    status, used = _run(tableau, basis, np.ones(n_cols, dtype=bool))
    pivots += used
    if status is LpStatus.UNBOUNDED:
        return LpSolution(status, pivots=pivots)

    y = np.zeros(n_cols)
    if basis:
        y[basis] = tableau[:-1, -1]
        # Re-solve the final basis against the original rows to shed pivot round-off.
        try:
            polished = np.linalg.solve(a_kept[:, basis], b_kept)
            if np.max(np.abs(polished - y[basis])) <= 1e-6:
                y[basis] = polished
        except np.linalg.LinAlgError:
            pass
        y[np.abs(y) < FEAS_TOL * 1e-3] = 0.0
        y = np.maximum(y, 0.0)

    n_y = std.transform.shape[1]
    x = std.transform @ y[:n_y] + std.offset
    violation = p.residuals(x)
    if violation > FEAS_TOL:
        logger.warning("LP solution violates constraints by %.3g; not reported as optimal", violation)
        return LpSolution(LpStatus.NUMERICAL, x=x, objective=float(p.c @ x), pivots=pivots)
    return LpSolution(LpStatus.OPTIMAL, x=x, objective=float(p.c @ x), pivots=pivots)


def dump_problem(p: LpProblem, solution: LpSolution | None = None) -> str:
    """Plain-text tabular rendering for offline inspection."""
    names = list(p.names) or [f"x{j}" for j in range(p.n_vars)]
    rows = [("objective", "min", np.nan, p.c)]
    rows += [(f"ub{i}", "<=", p.b_ub[i], p.a_ub[i]) for i in range(len(p.a_ub))]
    rows += [(f"eq{i}", "==", p.b_eq[i], p.a_eq[i]) for i in range(len(p.a_eq))]
    frame = pd.DataFrame([coeffs for *_, coeffs in rows], columns=names)
    frame.insert(0, "row", [r[0] for r in rows])
    frame["sense"] = [r[1] for r in rows]
    frame["rhs"] = [r[2] for r in rows]

    bounds = pd.DataFrame({"variable": names, "lo": p.lo, "hi": p.hi})
    parts = [
        f"variables={p.n_vars} inequalities={len(p.a_ub)} equalities={len(p.a_eq)}",
        frame.to_string(index=False, float_format=lambda v: f"{v:.10g}"),
        "",
        bounds.to_string(index=False, float_format=lambda v: f"{v:.10g}"),
    ]
    if solution is not None:
        parts += ["", f"status={solution.status.value} objective={solution.objective:.12g}"]
        if solution.x is not None:
            parts.append(" ".join(f"{n}={v:.12g}" for n, v in zip(names, solution.x)))
    return "\n".join(parts) + "\n"

"""Exception types raised across the post-processing pipeline.

LP infeasibility is a solver status, not an exception; see src.pipeline.linprog.
"""


class RocfError(Exception):
    """Base class for all pipeline errors."""


class DataError(RocfError, ValueError):
    """Malformed or out-of-range input data."""


class DegenerateGroupError(DataError):
    """A group lacks positives or negatives, so its ROC curve is undefined."""

    def __init__(self, group: int, n_pos: int, n_neg: int):
        self.group = group
        self.n_pos = n_pos
        self.n_neg = n_neg
        super().__init__(
            f"group {group} needs at least one positive and one negative "
            f"(positives={n_pos}, negatives={n_neg})"
        )


class DenominatorError(RocfError, ValueError):
    """A linear-fractional metric was evaluated with denominator below epsilon."""


class DegenerateBaseError(RocfError, ValueError):
    """The base operating point satisfies FPR + FNR = 1, so the mechanism is singular."""


class ConstructionInfeasibleError(RocfError):
    """No (edge, theta) pair attains the target operating characteristics."""

    def __init__(self, group: int, target_fnr: float, target_fpr: float):
        self.group = group
        self.target_fnr = target_fnr
        self.target_fpr = target_fpr
        super().__init__(
            f"no feasible construction for group {group} at target "
            f"(fnr={target_fnr:.6g}, fpr={target_fpr:.6g})"
        )

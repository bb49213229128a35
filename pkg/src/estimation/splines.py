"""
Cubic B-spline bases for continuous confounders.

Boundary knots sit at the minimum and maximum of the data and are repeated
``degree + 1`` times. Interior knots are placed at empirical quantiles
(default) or uniformly between the boundaries. The first basis function is
dropped so the basis can sit next to an intercept column.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from scipy.interpolate import BSpline

from .base import DegenerateInput

MIN_DISTINCT_VALUES = 5


class KnotRule(Enum):
    QUANTILE = "quantile"
    UNIFORM = "uniform"


def interior_knots(x: np.ndarray, n_interior_knots: int, knot_rule: KnotRule) -> np.ndarray:
    lo, hi = float(np.min(x)), float(np.max(x))
    fractions = np.arange(1, n_interior_knots + 1) / (n_interior_knots + 1)
    if KnotRule(knot_rule) is KnotRule.QUANTILE:
        return np.quantile(x, fractions)
    return lo + fractions * (hi - lo)


def bspline_knots(
    x: np.ndarray,
    degree: int = 3,
    n_interior_knots: int = 3,
    knot_rule: KnotRule = KnotRule.QUANTILE,
) -> np.ndarray:
    """Full knot vector with repeated boundary knots"""
    x = np.asarray(x, dtype=float)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise DegenerateInput("Spline input must be non-empty and finite")
    distinct = np.unique(x)
    if distinct.size < 2:
        raise DegenerateInput("Spline input is constant")
    if KnotRule(knot_rule) is KnotRule.QUANTILE and distinct.size < MIN_DISTINCT_VALUES:
        raise DegenerateInput(
            f"Quantile knots need at least {MIN_DISTINCT_VALUES} distinct values, got {distinct.size}"
        )

    lo, hi = distinct[0], distinct[-1]
    inner = interior_knots(x, n_interior_knots, knot_rule)
    if inner.size and (inner[0] <= lo or inner[-1] >= hi):
        raise DegenerateInput(f"Interior knots {inner.tolist()} collide with boundary [{lo}, {hi}]")
    return np.concatenate([np.repeat(lo, degree + 1), inner, np.repeat(hi, degree + 1)])


def full_basis(x: np.ndarray, knots: np.ndarray, degree: int) -> np.ndarray:
    """All ``len(knots) - degree - 1`` basis functions evaluated at x"""
    n_basis = len(knots) - degree - 1
    # One spline per identity column evaluates every basis function at once;
    # extrapolation keeps the right boundary on the last polynomial piece
    spline = BSpline(knots, np.eye(n_basis), degree, extrapolate=True)
    return spline(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SplineBasis:
    knots: np.ndarray
    degree: int
    values: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def column_names(self, prefix: str) -> Tuple[str, ...]:
        return tuple(f"bs({prefix})[{j}]" for j in range(1, self.n_columns + 1))

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Basis at new points, clipped to the boundary knots"""
        x = np.clip(np.asarray(x, dtype=float), self.knots[0], self.knots[-1])
        return full_basis(x, self.knots, self.degree)[:, 1:]


def bspline_basis(
    x: np.ndarray,
    degree: int = 3,
    n_interior_knots: int = 3,
    knot_rule: KnotRule = KnotRule.QUANTILE,
) -> SplineBasis:
    """
    B-spline basis without its first column.

    Returns:
        SplineBasis whose ``values`` has ``degree + n_interior_knots`` columns

    Raises:
        DegenerateInput: x is constant, has too few distinct values for
            quantile knots, or an interior knot lands on a boundary
    """
    knots = bspline_knots(x, degree, n_interior_knots, knot_rule)
    values = full_basis(x, knots, degree)[:, 1:]
    return SplineBasis(knots=knots, degree=degree, values=values)

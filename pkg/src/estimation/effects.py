"""
Restricted mean survival time and conditional average treatment effects.

The CATE of strategy a in stratum v at horizon t is the RMST difference
between the counterfactual curves of exposure a and of the standard
exposure 0, both predicted by the (weighted) Cox model.
"""

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd

from .survival import CoxFit, StepSurvival, predict_survival

STRATEGIES: Tuple[int, ...] = (1, 2)
STRATA: Tuple[int, ...] = (0, 1)


def rmst(curve: StepSurvival, horizon: float) -> float:
    """Exact area under a step survival curve on [0, horizon]"""
    if horizon <= 0:
        raise ValueError(f"RMST horizon must be positive, got {horizon}")
    inner = curve.times[(curve.times > 0) & (curve.times < horizon)]
    edges = np.concatenate([[0.0], inner, [float(horizon)]])
    heights = np.asarray(curve(edges[:-1]), dtype=float)
    return float(np.sum(heights * np.diff(edges)))


def rmst_grid(curve: StepSurvival, grid: Sequence[float]) -> np.ndarray:
    """RMST at every horizon of a grid in one pass"""
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0):
        raise ValueError("RMST horizons must be positive")
    knots = np.concatenate([[0.0], curve.times[curve.times > 0]])
    heights = np.asarray(curve(knots), dtype=float)
    area = np.concatenate([[0.0], np.cumsum(heights[:-1] * np.diff(knots))])
    j = np.searchsorted(knots, grid, side="right") - 1
    return area[j] + heights[j] * (grid - knots[j])


def cate(fit: CoxFit, exposure: int, effect_modifier: int, horizon: float) -> float:
    reduced = rmst(predict_survival(fit, exposure, effect_modifier), horizon)
    standard = rmst(predict_survival(fit, 0, effect_modifier), horizon)
    return reduced - standard


def cate_grid(fit: CoxFit, grid: Sequence[float]) -> np.ndarray:
    """CATE array indexed [a - 1, v, t] over both strategies and strata"""
    result = np.empty((len(STRATEGIES), len(STRATA), len(grid)))
    for v in STRATA:
        standard = rmst_grid(predict_survival(fit, 0, v), grid)
        for a in STRATEGIES:
            result[a - 1, v] = rmst_grid(predict_survival(fit, a, v), grid) - standard
    return result


def cate_frame(values: np.ndarray, grid: Sequence[float]) -> pd.DataFrame:
    rows = [
        {"a": a, "v": v, "t": float(t), "estimate": float(values[a - 1, v, k])}
        for a in STRATEGIES
        for v in STRATA
        for k, t in enumerate(grid)
    ]
    return pd.DataFrame(rows, columns=["a", "v", "t", "estimate"])


def percentile_bounds(values: np.ndarray, level: float = 0.95) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lower and upper percentile bounds along the first axis.

    The q-quantile of B ordered values is the k-th smallest with
    k = ceil(q * B), k >= 1, so the 2.5th percentile of 1000 replicates is
    the 25th smallest.
    """
    values = np.sort(np.asarray(values, dtype=float), axis=0)
    n = values.shape[0]
    if n == 0:
        raise ValueError("No replicate values to take percentiles of")
    alpha = (1.0 - level) / 2.0

    def rank(q: float) -> int:
        return min(max(math.ceil(round(q * n, 9)), 1), n)

    return values[rank(alpha) - 1], values[rank(1.0 - alpha) - 1]


@dataclass(frozen=True)
class CateResult:
    """CATE curve of one (strategy, stratum) with percentile bootstrap bounds"""

    a: int
    v: int
    times: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_replicates: int

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ValueError("Lower bootstrap bound exceeds upper bound")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "a": self.a,
                "v": self.v,
                "t": self.times,
                "estimate": self.estimate,
                "lower": self.lower,
                "upper": self.upper,
            }
        )


def cate_results(
    point: np.ndarray, replicates: np.ndarray, grid: Sequence[float], level: float = 0.95
) -> List[CateResult]:
    """Combine point estimates [a-1, v, t] with successful replicates [b, a-1, v, t]"""
    lower, upper = percentile_bounds(replicates, level)
    times = np.asarray(grid, dtype=float)
    return [
        CateResult(
            a=a,
            v=v,
            times=times,
            estimate=point[a - 1, v],
            lower=lower[a - 1, v],
            upper=upper[a - 1, v],
            n_replicates=replicates.shape[0],
        )
        for a in STRATEGIES
        for v in STRATA
    ]

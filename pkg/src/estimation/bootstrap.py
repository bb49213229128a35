"""
Generalized IPTW bootstrap for CATE confidence intervals.

Subjects are partitioned into the six (exposure, effect modifier)
sub-cohorts. Each replicate redraws every sub-cohort to its original size,
with replacement, under probabilities proportional to the stabilized
weights, then re-estimates the CATE curves on the union. Replicate b draws
from its own generator seeded by (master seed, b), so the replicate set is
the same whatever the number of workers.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..covariates import EXPOSURE_LEVELS
from .base import EmptySubCohort, NumericalError, TooManyFailedReplicates
from .effects import STRATA, STRATEGIES, CateResult, cate_grid, cate_results
from .iptw import EFFECT_MODIFIER, EXPOSURE, StabilizedWeights, stabilized_weights
from .survival import TieMethod, cox_design, fit_weighted_cox

logger = logging.getLogger(__name__)

SUB_COHORTS: Tuple[Tuple[int, int], ...] = tuple((a, v) for a in EXPOSURE_LEVELS for v in STRATA)

Estimator = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BootstrapPlan:
    """Sub-cohort partition and per-subject sampling probabilities"""

    n_replicates: int
    seed: int
    groups: Tuple[Tuple[int, int], ...]
    indices: Tuple[np.ndarray, ...]
    probabilities: Tuple[np.ndarray, ...]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(len(idx) for idx in self.indices)

    @property
    def n_subjects(self) -> int:
        return sum(self.sizes)

    def rng(self, replicate: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(entropy=self.seed, spawn_key=(replicate,)))

    def draw(self, replicate: int) -> np.ndarray:
        """Row positions of replicate b; each sub-cohort keeps its size"""
        rng = self.rng(replicate)
        parts = []
        for idx, p in zip(self.indices, self.probabilities):
            sample = rng.choice(idx, size=len(idx), replace=True, p=p)
            if len(sample) != len(idx):
                raise AssertionError("Bootstrap sub-sample size differs from its sub-cohort")
            parts.append(sample)
        return np.concatenate(parts)


def bootstrap_plan(
    frame: pd.DataFrame,
    weights: np.ndarray,
    n_replicates: int = 1000,
    seed: int = 0,
) -> BootstrapPlan:
    """
    Partition by (A, V) and normalize weights within each sub-cohort.

    Raises:
        EmptySubCohort: some (a, v) combination has no subject
    """
    if n_replicates < 1:
        raise ValueError(f"Number of bootstrap replicates must be >= 1, got {n_replicates}")
    weights = np.asarray(weights.weights if isinstance(weights, StabilizedWeights) else weights, dtype=float)
    exposure = frame[EXPOSURE].to_numpy(dtype=int)
    modifier = frame[EFFECT_MODIFIER].to_numpy(dtype=int)

    indices, probabilities = [], []
    for a, v in SUB_COHORTS:
        idx = np.nonzero((exposure == a) & (modifier == v))[0]
        if idx.size == 0:
            raise EmptySubCohort(a, v)
        indices.append(idx)
        probabilities.append(weights[idx] / weights[idx].sum())
    logger.debug("Bootstrap sub-cohort sizes: %s", [len(idx) for idx in indices])
    return BootstrapPlan(
        n_replicates=n_replicates,
        seed=int(seed),
        groups=SUB_COHORTS,
        indices=tuple(indices),
        probabilities=tuple(probabilities),
    )


class CoxCateEstimator:
    """
    CATE curves of the weighted Cox model on a subset of rows.

    With ``reestimate_spec`` set, stabilized weights are refit on each
    replicate; otherwise the original weights of the drawn rows are used.
    Instances are picklable so replicates can run in worker processes.
    """

    def __init__(
        self,
        frame: pd.DataFrame,
        weights: np.ndarray,
        grid: Sequence[float],
        tie_method: str = TieMethod.BRESLOW.value,
        tol: float = 1e-9,
        max_iter: int = 50,
        reestimate_spec: Optional[str] = None,
        weight_options: Optional[dict] = None,
    ):
        self.frame = frame.reset_index(drop=True)
        self.weights = np.asarray(weights, dtype=float)
        self.grid = np.asarray(grid, dtype=float)
        self.tie_method = tie_method
        self.tol = tol
        self.max_iter = max_iter
        self.reestimate_spec = reestimate_spec
        self.weight_options = dict(weight_options or {})

    def __call__(self, rows: np.ndarray) -> np.ndarray:
        sample = self.frame.iloc[rows].reset_index(drop=True)
        if self.reestimate_spec:
            w = stabilized_weights(self.reestimate_spec, sample, **self.weight_options).weights
        else:
            w = self.weights[rows]
        fit = fit_weighted_cox(
            sample["efs_time_months"].to_numpy(dtype=float),
            sample["efs_event"].to_numpy(dtype=int),
            cox_design(sample[EXPOSURE], sample[EFFECT_MODIFIER]),
            w,
            tie_method=self.tie_method,
            tol=self.tol,
            max_iter=self.max_iter,
        )
        return cate_grid(fit, self.grid)


@dataclass(frozen=True)
class BootstrapResult:
    results: List[CateResult]
    grid: np.ndarray
    # Indexed [b, a - 1, v, t]; rows of failed replicates are NaN
    replicates: np.ndarray
    failed: Tuple[int, ...]

    @property
    def n_succeeded(self) -> int:
        return self.replicates.shape[0] - len(self.failed)

    def frame(self) -> pd.DataFrame:
        return pd.concat([result.to_frame() for result in self.results], ignore_index=True)

    def replicates_frame(self) -> pd.DataFrame:
        rows = []
        for b in range(self.replicates.shape[0]):
            if b in self.failed:
                continue
            for a in STRATEGIES:
                for v in STRATA:
                    for k, t in enumerate(self.grid):
                        rows.append({"b": b, "a": a, "v": v, "t": float(t), "value": self.replicates[b, a - 1, v, k]})
        return pd.DataFrame(rows, columns=["b", "a", "v", "t", "value"])


def _run_replicate(plan: BootstrapPlan, estimator: Estimator, replicate: int) -> Tuple[int, Optional[np.ndarray], str]:
    try:
        return replicate, estimator(plan.draw(replicate)), ""
    except NumericalError as e:
        return replicate, None, f"{type(e).__name__}: {e}"


_worker_state: dict = {}


def _init_worker(plan: BootstrapPlan, estimator: Estimator) -> None:
    _worker_state["plan"] = plan
    _worker_state["estimator"] = estimator


def _worker_task(replicate: int):
    return _run_replicate(_worker_state["plan"], _worker_state["estimator"], replicate)


def bootstrap_cate_ci(
    plan: BootstrapPlan,
    estimator: Estimator,
    grid: Sequence[float],
    level: float = 0.95,
    workers: int = 1,
    max_failure_rate: float = 0.05,
) -> BootstrapResult:
    """
    Percentile confidence bounds of the CATE curves.

    The point estimate is the estimator on the full sample; replicates whose
    fit fails are counted and excluded from the percentiles.

    Raises:
        TooManyFailedReplicates: more than ``max_failure_rate`` of replicates failed
    """
    grid = np.asarray(grid, dtype=float)
    point = estimator(np.arange(plan.n_subjects))
    replicates = np.full((plan.n_replicates,) + point.shape, np.nan)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(plan, estimator)) as pool:
            chunksize = max(1, plan.n_replicates // (4 * workers))
            outcomes = list(pool.map(_worker_task, range(plan.n_replicates), chunksize=chunksize))
    else:
        outcomes = [_run_replicate(plan, estimator, b) for b in range(plan.n_replicates)]

    failed = []
    for b, values, error in outcomes:
        if values is None:
            logger.debug("Bootstrap replicate %d failed: %s", b, error)
            failed.append(b)
        else:
            replicates[b] = values

    if failed:
        logger.warning("%d of %d bootstrap replicates failed and were excluded", len(failed), plan.n_replicates)
    if len(failed) > max_failure_rate * plan.n_replicates:
        raise TooManyFailedReplicates(len(failed), plan.n_replicates, max_failure_rate)

    ok = np.ones(plan.n_replicates, dtype=bool)
    ok[failed] = False
    return BootstrapResult(
        results=cate_results(point, replicates[ok], grid, level),
        grid=grid,
        replicates=replicates,
        failed=tuple(failed),
    )

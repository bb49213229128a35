"""
Right-censored survival estimators.

- Kaplan-Meier and Nelson-Aalen estimators with optional case weights
- reverse Kaplan-Meier median follow-up
- k-group log-rank test
- case-weighted Cox partial-likelihood fit with Breslow (default) or Efron
  ties, model-based and robust sandwich covariance, and the weighted Breslow
  baseline cumulative hazard

Event-time arrays are sorted once per call; every risk-set sum is a reverse
cumulative sum evaluated at the first subject of each tied block.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.stats import chi2

from .base import (
    Collinear,
    DegenerateGroups,
    DegenerateInput,
    MedianUndefined,
    MonotoneLikelihood,
    NoEvents,
    NotConverged,
)

logger = logging.getLogger(__name__)

# Order of the Cox MSM terms: reduced, highly reduced, their products with
# the effect modifier, and the effect modifier itself
COX_TERMS: Tuple[str, ...] = ("A1", "A2", "A1:V", "A2:V", "V")
MONOTONE_LIMIT = 25.0
MAX_HALVINGS = 40
WALD_Z = 1.96


class TieMethod(Enum):
    BRESLOW = "breslow"
    EFRON = "efron"


def _as_arrays(times, events, weights=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    if times.shape != events.shape or times.ndim != 1:
        raise ValueError("times and events must be one-dimensional arrays of equal length")
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise DegenerateInput("Survival times must be finite and non-negative")
    if weights is None:
        weights = np.ones_like(times)
    else:
        weights = np.asarray(weights, dtype=float)
        if weights.shape != times.shape:
            raise ValueError("weights must match times in length")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise DegenerateInput("Case weights must be finite and strictly positive")
    return times, events, weights


def _event_table(times: np.ndarray, events: np.ndarray, weights: np.ndarray):
    """Distinct times with weighted deaths and weighted numbers at risk"""
    unique, inverse = np.unique(times, return_inverse=True)
    deaths = np.bincount(inverse, weights=weights * events, minlength=len(unique))
    leaving = np.bincount(inverse, weights=weights, minlength=len(unique))
    at_risk = leaving[::-1].cumsum()[::-1]
    return unique, deaths, at_risk


def _step_lookup(times: np.ndarray, values: np.ndarray, t, before: float) -> Union[float, np.ndarray]:
    t_arr = np.asarray(t, dtype=float)
    idx = np.searchsorted(times, t_arr, side="right") - 1
    result = np.where(idx >= 0, values[np.clip(idx, 0, None)] if len(values) else before, before)
    return float(result) if np.ndim(t) == 0 else result


@dataclass(frozen=True)
class StepSurvival:
    """Right-continuous survival step function; S(t) = 1 before the first jump"""

    times: np.ndarray
    survival: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        survival = np.asarray(self.survival, dtype=float)
        if times.shape != survival.shape:
            raise ValueError("times and survival must have equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("Jump times must be strictly increasing")
        if np.any(survival < 0) or np.any(survival > 1) or np.any(np.diff(survival) > 0):
            raise ValueError("Survival must be nonincreasing within [0, 1]")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "survival", survival)

    def __call__(self, t):
        return _step_lookup(self.times, self.survival, t, 1.0)

    def median(self) -> float:
        """Smallest t with S(t) <= 0.5"""
        below = np.nonzero(self.survival <= 0.5)[0]
        if below.size == 0:
            raise MedianUndefined("Survival never drops to 0.5")
        return float(self.times[below[0]])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"time": self.times, "survival": self.survival})


@dataclass(frozen=True)
class CumulativeHazard:
    """Right-continuous cumulative hazard step function, 0 before the first jump"""

    times: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        return _step_lookup(self.times, self.values, t, 0.0)


def kaplan_meier(times, events, weights=None) -> StepSurvival:
    """Product-limit estimator with optional case weights"""
    times, events, weights = _as_arrays(times, events, weights)
    unique, deaths, at_risk = _event_table(times, events, weights)
    jumps = deaths > 0
    survival = np.cumprod(1.0 - deaths[jumps] / at_risk[jumps])
    return StepSurvival(unique[jumps], np.clip(survival, 0.0, 1.0))


def nelson_aalen(times, events, weights=None) -> CumulativeHazard:
    times, events, weights = _as_arrays(times, events, weights)
    unique, deaths, at_risk = _event_table(times, events, weights)
    jumps = deaths > 0
    return CumulativeHazard(unique[jumps], np.cumsum(deaths[jumps] / at_risk[jumps]))


def reverse_kaplan_meier_median(times, events) -> float:
    """Median follow-up: Kaplan-Meier median with censoring treated as the event"""
    times, events, _ = _as_arrays(times, events)
    if events.all():
        raise MedianUndefined("No censored observation to estimate follow-up from")
    return kaplan_meier(times, ~events).median()


@dataclass(frozen=True)
class LogRankResult:
    statistic: float
    df: int
    p_value: float
    observed: Tuple[float, ...] = ()
    expected: Tuple[float, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "observed": list(self.observed),
            "expected": list(self.expected),
        }


def logrank_test(times, events, groups) -> LogRankResult:
    """
    k-group log-rank test.

    Raises:
        DegenerateGroups: fewer than two groups or no events at all
    """
    times, events, _ = _as_arrays(times, events)
    labels, group_index = np.unique(np.asarray(groups), return_inverse=True)
    k = len(labels)
    if k < 2:
        raise DegenerateGroups(f"Log-rank test needs at least two groups, got {k}")
    if not events.any():
        raise DegenerateGroups("Log-rank test needs at least one event")

    event_times = np.unique(times[events])
    observed = np.zeros(k)
    expected = np.zeros(k)
    variance = np.zeros((k, k))
    for t in event_times:
        at_risk = times >= t
        n_g = np.bincount(group_index[at_risk], minlength=k).astype(float)
        d_g = np.bincount(group_index[events & (times == t)], minlength=k).astype(float)
        n, d = n_g.sum(), d_g.sum()
        observed += d_g
        expected += d * n_g / n
        if n > 1:
            share = n_g / n
            variance += d * (n - d) / (n - 1) * (np.diag(share) - np.outer(share, share))

    diff = (observed - expected)[:-1]
    statistic = float(diff @ np.linalg.pinv(variance[:-1, :-1]) @ diff)
    statistic = max(statistic, 0.0)
    df = k - 1
    return LogRankResult(
        statistic=statistic,
        df=df,
        p_value=float(chi2.sf(statistic, df)),
        observed=tuple(observed.tolist()),
        expected=tuple(expected.tolist()),
    )


def cox_design(exposure, effect_modifier) -> np.ndarray:
    """Columns A1, A2, A1:V, A2:V, V for exposure levels 0/1/2 and binary V"""
    a = np.asarray(exposure, dtype=int)
    v = np.asarray(effect_modifier, dtype=float)
    a1 = (a == 1).astype(float)
    a2 = (a == 2).astype(float)
    return np.column_stack([a1, a2, a1 * v, a2 * v, v])


def pattern_row(exposure: int, effect_modifier: int) -> np.ndarray:
    return cox_design([exposure], [effect_modifier])[0]


class _SortedData:
    """Survival data sorted by time with tied-block boundaries"""

    def __init__(self, times, events, X, weights):
        order = np.argsort(times, kind="mergesort")
        self.T = times[order]
        self.E = events[order]
        self.X = X[order]
        self.w = weights[order]
        self.first = np.searchsorted(self.T, self.T, side="left")
        self.last = np.searchsorted(self.T, self.T, side="right") - 1

    def risk_sums(self, beta: np.ndarray):
        eta = self.X @ beta
        shift = float(eta.max())
        r = self.w * np.exp(eta - shift)
        S0 = r[::-1].cumsum()[::-1]
        S1 = (r[:, None] * self.X)[::-1].cumsum(axis=0)[::-1]
        return eta, shift, r, S0, S1


def _reverse_cumsum(values: np.ndarray) -> np.ndarray:
    return values[::-1].cumsum(axis=0)[::-1]


def _breslow_terms(data: _SortedData, beta: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    eta, shift, r, S0, S1 = data.risk_sums(beta)
    S2 = _reverse_cumsum(r[:, None, None] * data.X[:, :, None] * data.X[:, None, :])
    ev = data.E
    idx = data.first[ev]
    w = data.w[ev]
    s0 = S0[idx]
    xbar = S1[idx] / s0[:, None]
    ll = float(np.sum(w * (eta[ev] - shift - np.log(s0))))
    grad = np.sum(w[:, None] * (data.X[ev] - xbar), axis=0)
    info = np.einsum("i,ijk->jk", w, S2[idx] / s0[:, None, None]) - np.einsum("i,ij,ik->jk", w, xbar, xbar)
    return ll, grad, info


def _efron_terms(data: _SortedData, beta: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray]:
    eta, shift, r, S0, S1 = data.risk_sums(beta)
    S2 = _reverse_cumsum(r[:, None, None] * data.X[:, :, None] * data.X[:, None, :])
    p = len(beta)
    ll, grad, info = 0.0, np.zeros(p), np.zeros((p, p))

    # Event rows are sorted by time, so each tied block is contiguous
    event_rows = np.nonzero(data.E)[0]
    starts, offsets = np.unique(data.first[event_rows], return_index=True)
    for start, tied in zip(starts, np.split(event_rows, offsets[1:])):
        m = len(tied)
        w_tied = data.w[tied]
        mean_weight = w_tied.sum() / m
        T0 = r[tied].sum()
        T1 = r[tied] @ data.X[tied]
        T2 = np.einsum("i,ij,ik->jk", r[tied], data.X[tied], data.X[tied])

        fractions = np.arange(m) / m
        denom = S0[start] - fractions * T0
        numer1 = S1[start][None, :] - fractions[:, None] * T1[None, :]
        means = numer1 / denom[:, None]
        second = (S2[start][None, :, :] - fractions[:, None, None] * T2[None, :, :]) / denom[:, None, None]

        ll += float(w_tied @ (eta[tied] - shift)) - mean_weight * float(np.log(denom).sum())
        grad += w_tied @ data.X[tied] - mean_weight * means.sum(axis=0)
        info += mean_weight * (second.sum(axis=0) - means.T @ means)
    return ll, grad, info


def _terms(data: _SortedData, beta: np.ndarray, tie_method: TieMethod):
    if tie_method is TieMethod.EFRON:
        return _efron_terms(data, beta)
    return _breslow_terms(data, beta)


def cox_partial_likelihood(
    beta, times, events, design, weights=None, tie_method: Union[str, TieMethod] = TieMethod.BRESLOW
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Weighted log partial likelihood, its gradient and the observed information"""
    times, events, weights = _as_arrays(times, events, weights)
    data = _SortedData(times, events, np.asarray(design, dtype=float), weights)
    return _terms(data, np.asarray(beta, dtype=float), TieMethod(tie_method))


def breslow_cumulative_hazard(times, events, design, weights, coefficients) -> CumulativeHazard:
    """Weighted Breslow baseline cumulative hazard at given coefficients"""
    times, events, weights = _as_arrays(times, events, weights)
    data = _SortedData(times, events, np.asarray(design, dtype=float), weights)
    return _breslow_baseline(data, np.asarray(coefficients, dtype=float))


def _breslow_baseline(data: _SortedData, beta: np.ndarray) -> CumulativeHazard:
    _, shift, _, S0, _ = data.risk_sums(beta)
    event_rows = np.nonzero(data.E)[0]
    starts, block = np.unique(data.first[event_rows], return_inverse=True)
    deaths = np.bincount(block, weights=data.w[event_rows], minlength=len(starts))
    increments = deaths / S0[starts] * np.exp(-shift)
    return CumulativeHazard(data.T[starts], np.cumsum(increments))


def _score_residuals(data: _SortedData, beta: np.ndarray) -> np.ndarray:
    """Per-subject score residuals (unweighted), Breslow form"""
    eta, shift, r, S0, S1 = data.risk_sums(beta)
    xbar = S1[data.first] / S0[data.first][:, None]
    hazard_jump = np.where(data.E, data.w / S0[data.first], 0.0)
    cum_hazard = np.cumsum(hazard_jump)[data.last]
    cum_hazard_x = np.cumsum(hazard_jump[:, None] * xbar, axis=0)[data.last]
    risk = np.exp(eta - shift)
    return data.E[:, None] * (data.X - xbar) - risk[:, None] * (data.X * cum_hazard[:, None] - cum_hazard_x)


@dataclass(frozen=True)
class CoxFit:
    """Fitted (weighted) Cox model"""

    terms: Tuple[str, ...]
    coefficients: np.ndarray
    model_covariance: np.ndarray
    robust_covariance: np.ndarray
    baseline: CumulativeHazard
    log_likelihood: float
    n_iter: int
    converged: bool
    tie_method: str
    n_subjects: int
    n_events: int
    ll_history: Tuple[float, ...] = ()

    def standard_errors(self, robust: bool = True) -> np.ndarray:
        cov = self.robust_covariance if robust else self.model_covariance
        return np.sqrt(np.clip(np.diag(cov), 0.0, None))

    @property
    def hazard_ratios(self) -> np.ndarray:
        return np.exp(self.coefficients)

    def confidence_intervals(self, robust: bool = True) -> np.ndarray:
        """Wald intervals, estimate +/- 1.96 SE, one row per term"""
        se = self.standard_errors(robust)
        return np.column_stack([self.coefficients - WALD_Z * se, self.coefficients + WALD_Z * se])

    def p_values(self, robust: bool = True) -> np.ndarray:
        z = self.coefficients / self.standard_errors(robust)
        return chi2.sf(z ** 2, 1)

    def linear_predictor(self, exposure: int, effect_modifier: int) -> float:
        return float(pattern_row(exposure, effect_modifier) @ self.coefficients)

    def summary(self, robust: bool = True) -> pd.DataFrame:
        ci = self.confidence_intervals(robust)
        return pd.DataFrame(
            {
                "term": list(self.terms),
                "coef": self.coefficients,
                "hr": self.hazard_ratios,
                "se": self.standard_errors(robust),
                "lower": ci[:, 0],
                "upper": ci[:, 1],
                "p_value": self.p_values(robust),
            }
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "terms": list(self.terms),
            "coefficients": self.coefficients.tolist(),
            "model_covariance": self.model_covariance.tolist(),
            "robust_covariance": self.robust_covariance.tolist(),
            "robust_se": self.standard_errors(True).tolist(),
            "model_se": self.standard_errors(False).tolist(),
            "log_likelihood": self.log_likelihood,
            "n_iter": self.n_iter,
            "converged": self.converged,
            "tie_method": self.tie_method,
            "n_subjects": self.n_subjects,
            "n_events": self.n_events,
        }


def fit_weighted_cox(
    times,
    events,
    design,
    weights=None,
    tie_method: Union[str, TieMethod] = TieMethod.BRESLOW,
    tol: float = 1e-9,
    max_iter: int = 50,
    terms: Optional[Sequence[str]] = None,
) -> CoxFit:
    """
    Case-weighted Cox regression by Newton iterations with step halving.

    Each subject contributes its weight to the score and the information.
    The robust covariance is the sandwich I^-1 (sum w_i^2 U_i U_i^T) I^-1
    over score residuals U_i, with no small-sample correction.

    Raises:
        NoEvents: no event observed
        Collinear: design columns are linearly dependent
        MonotoneLikelihood: a coefficient exceeds 25 in absolute value
        NotConverged: max_iter reached
    """
    tie_method = TieMethod(tie_method)
    times, events, weights = _as_arrays(times, events, weights)
    X = np.asarray(design, dtype=float)
    if X.ndim != 2 or X.shape[0] != len(times):
        raise ValueError(f"Design of shape {X.shape} does not match {len(times)} subjects")
    p = X.shape[1]
    names = tuple(terms) if terms is not None else (COX_TERMS if p == len(COX_TERMS) else tuple(f"x{j}" for j in range(p)))
    if not events.any():
        raise NoEvents("Cox model needs at least one event")
    if np.linalg.matrix_rank(X - X.mean(axis=0)) < p:
        raise Collinear(f"Design columns {names} are collinear")

    data = _SortedData(times, events, X, weights)
    beta = np.zeros(p)
    ll, grad, info = _terms(data, beta, tie_method)
    history = [ll]

    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        try:
            step = linalg.solve(info, grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError) as e:
            raise Collinear(f"Information matrix is singular: {e}")

        candidate = beta + step
        ll_new = _terms(data, candidate, tie_method)[0]
        halvings = 0
        while not ll_new >= ll and halvings < MAX_HALVINGS:
            step = step / 2.0
            candidate = beta + step
            ll_new = _terms(data, candidate, tie_method)[0]
            halvings += 1

        if np.max(np.abs(candidate)) > MONOTONE_LIMIT:
            raise MonotoneLikelihood(
                f"Coefficient {names[int(np.argmax(np.abs(candidate)))]} diverges "
                f"({candidate[int(np.argmax(np.abs(candidate)))]:.3g})"
            )
        if not ll_new >= ll:
            converged = True
            break

        change = abs(ll_new - ll)
        beta = candidate
        ll, grad, info = _terms(data, beta, tie_method)
        history.append(ll)
        logger.debug("Cox iteration %d: loglik=%.12f halvings=%d", n_iter, ll, halvings)
        if np.max(np.abs(step)) < tol or change <= 1e-14 * max(abs(ll), 1.0):
            converged = True
            break

    if not converged:
        raise NotConverged(max_iter, f"max |score| = {np.max(np.abs(grad)):.3g}")

    model_cov = linalg.inv(info)
    model_cov = (model_cov + model_cov.T) / 2.0
    residuals = data.w[:, None] * _score_residuals(data, beta)
    meat = residuals.T @ residuals
    robust_cov = model_cov @ meat @ model_cov
    robust_cov = (robust_cov + robust_cov.T) / 2.0

    beta.setflags(write=False)
    return CoxFit(
        terms=names,
        coefficients=beta,
        model_covariance=model_cov,
        robust_covariance=robust_cov,
        baseline=_breslow_baseline(data, beta),
        log_likelihood=ll,
        n_iter=n_iter,
        converged=True,
        tie_method=tie_method.value,
        n_subjects=len(times),
        n_events=int(events.sum()),
        ll_history=tuple(history),
    )


def predict_survival(fit: CoxFit, exposure: int, effect_modifier: int) -> StepSurvival:
    """Survival curve S(t) = exp(-H0(t) exp(lp)) of one (exposure, modifier) pattern"""
    risk = np.exp(fit.linear_predictor(exposure, effect_modifier))
    survival = np.exp(-fit.baseline.values * risk)
    return StepSurvival(fit.baseline.times, survival)


def survival_curves(fit: CoxFit, patterns: Sequence[Tuple[int, int]]) -> pd.DataFrame:
    """Long-format curves: exposure, effect_modifier, time, survival"""
    frames = []
    for a, v in patterns:
        curve = predict_survival(fit, a, v)
        times = np.concatenate([[0.0], curve.times])
        survival = np.concatenate([[1.0], curve.survival])
        frames.append(pd.DataFrame({"a": a, "v": v, "time": times, "survival": survival}))
    return pd.concat(frames, ignore_index=True)

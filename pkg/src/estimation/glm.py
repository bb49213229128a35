"""
Multinomial logistic regression fit by Newton iterations with step halving.

Category 0 is the reference: its linear predictor is fixed at zero and each
other category k carries a coefficient vector over the design columns.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg
from scipy.special import log_softmax, softmax

from .base import ColumnMismatch, DegenerateInput, DesignMatrix, NotConverged, RankDeficient, Separation

logger = logging.getLogger(__name__)

N_CATEGORIES = 3
REFERENCE_CATEGORY = 0
SEPARATION_NORM = 1e3
RELATIVE_LL_TOLERANCE = 1e-12
MAX_HALVINGS = 40
# Largest per-observation score accepted when no ascent remains
STATIONARY_SCORE = 1e-6


@dataclass(frozen=True)
class MultinomialFit:
    """Fitted multinomial logit with category 0 as reference"""

    columns: Tuple[str, ...]
    # Row k - 1 holds the coefficients of category k
    coefficients: np.ndarray
    log_likelihood: float
    converged: bool
    n_iter: int
    ll_history: Tuple[float, ...] = ()
    reference: int = REFERENCE_CATEGORY

    @property
    def n_categories(self) -> int:
        return self.coefficients.shape[0] + 1

    def coefficient(self, category: int, column: str) -> float:
        return float(self.coefficients[category - 1, self.columns.index(column)])


def _linear_predictors(beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """n x K matrix of linear predictors with a zero reference column"""
    eta = X @ beta.T
    return np.column_stack([np.zeros(X.shape[0]), eta])


def multinomial_log_likelihood(beta: np.ndarray, y: np.ndarray, X: np.ndarray) -> float:
    """Log-likelihood at ``beta`` of shape (K - 1, p)"""
    log_p = log_softmax(_linear_predictors(beta, X), axis=1)
    return float(log_p[np.arange(len(y)), y].sum())


def multinomial_score(beta: np.ndarray, y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Gradient of the log-likelihood, shape (K - 1, p)"""
    probs = softmax(_linear_predictors(beta, X), axis=1)
    indicators = np.eye(beta.shape[0] + 1)[y]
    return (indicators - probs)[:, 1:].T @ X


def multinomial_information(beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Observed (= expected) information for the flattened coefficients"""
    probs = softmax(_linear_predictors(beta, X), axis=1)[:, 1:]
    n_free, p = beta.shape
    info = np.empty((n_free * p, n_free * p))
    for k in range(n_free):
        for m in range(n_free):
            w = probs[:, k] * ((k == m) - probs[:, m])
            info[k * p:(k + 1) * p, m * p:(m + 1) * p] = X.T @ (w[:, None] * X)
    return info


def fit_multinomial(
    y: np.ndarray,
    X: DesignMatrix,
    tol: float = 1e-8,
    max_iter: int = 100,
    n_categories: int = N_CATEGORIES,
) -> MultinomialFit:
    """
    Maximum-likelihood multinomial logit.

    Converges when the largest absolute score component drops below ``tol``
    or the relative log-likelihood change drops below 1e-12.

    Raises:
        DegenerateInput: a category of y is never observed
        RankDeficient: design columns are linearly dependent
        Separation: coefficient norm exceeds 1e3 or information is singular
        NotConverged: max_iter reached, or step halving stalls away from a stationary point
    """
    y = np.asarray(y, dtype=int)
    values = X.values
    if len(y) != X.n_rows:
        raise ValueError(f"{len(y)} outcomes but {X.n_rows} design rows")
    counts = np.bincount(y, minlength=n_categories)
    if len(counts) > n_categories or np.any(counts == 0):
        raise DegenerateInput(f"Every category must be observed, got counts {counts.tolist()}")
    if np.linalg.matrix_rank(values) < X.n_columns:
        raise RankDeficient(f"Design of {X.n_columns} columns is rank deficient: {X.columns}")

    beta = np.zeros((n_categories - 1, X.n_columns))
    ll = multinomial_log_likelihood(beta, y, values)
    history = [ll]

    for iteration in range(1, max_iter + 1):
        score = multinomial_score(beta, y, values)
        if np.max(np.abs(score)) < tol:
            return _finish(X, beta, ll, iteration - 1, history)

        info = multinomial_information(beta, values)
        try:
            step = linalg.solve(info, score.ravel(), assume_a="pos").reshape(beta.shape)
        except (linalg.LinAlgError, ValueError) as e:
            raise Separation(f"Information matrix is singular at iteration {iteration}: {e}")

        candidate = beta + step
        ll_new = multinomial_log_likelihood(candidate, y, values)
        halvings = 0
        while not ll_new >= ll and halvings < MAX_HALVINGS:
            step = step / 2.0
            candidate = beta + step
            ll_new = multinomial_log_likelihood(candidate, y, values)
            halvings += 1
        if not ll_new >= ll:
            # No ascent left along the Newton direction
            worst = float(np.max(np.abs(score)))
            if worst > max(tol, STATIONARY_SCORE * len(y)):
                raise NotConverged(iteration, f"step halving exhausted with max |score| = {worst:.3g}")
            return _finish(X, beta, ll, iteration, history)

        if np.linalg.norm(candidate) > SEPARATION_NORM:
            raise Separation(
                f"Coefficient norm {np.linalg.norm(candidate):.3g} exceeds {SEPARATION_NORM:g}"
            )

        change = abs(ll_new - ll) / max(abs(ll), 1.0)
        beta, ll = candidate, ll_new
        history.append(ll)
        logger.debug("Newton iteration %d: loglik=%.10f halvings=%d", iteration, ll, halvings)
        if change < RELATIVE_LL_TOLERANCE:
            return _finish(X, beta, ll, iteration, history)

    raise NotConverged(max_iter, f"max |score| = {np.max(np.abs(multinomial_score(beta, y, values))):.3g}")


def _finish(X: DesignMatrix, beta: np.ndarray, ll: float, n_iter: int, history) -> MultinomialFit:
    beta = beta.copy()
    beta.setflags(write=False)
    return MultinomialFit(
        columns=X.columns,
        coefficients=beta,
        log_likelihood=ll,
        converged=True,
        n_iter=n_iter,
        ll_history=tuple(history),
    )


def predict_proba(fit: MultinomialFit, X: DesignMatrix) -> np.ndarray:
    """Row-stochastic matrix of category probabilities"""
    if tuple(X.columns) != tuple(fit.columns):
        raise ColumnMismatch(f"Design columns {X.columns} do not match fitted columns {fit.columns}")
    return softmax(_linear_predictors(fit.coefficients, X.values), axis=1)

import sys
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
from scipy import optimize

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.estimation.base import ColumnMismatch, DegenerateInput, DesignMatrix, NotConverged, RankDeficient
from src.estimation.glm import (
    MultinomialFit,
    fit_multinomial,
    multinomial_information,
    multinomial_log_likelihood,
    multinomial_score,
    predict_proba,
)


def simulated_multinomial(n: int, seed: int):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    z = rng.binomial(1, 0.4, size=n)
    X = DesignMatrix.from_columns([("x", x), ("z", z)], n)
    beta = np.array([[-0.5, 1.0, 0.4], [0.3, -0.8, -0.6]])
    eta = np.column_stack([np.zeros(n), X.values @ beta.T])
    probs = np.exp(eta) / np.exp(eta).sum(axis=1, keepdims=True)
    y = np.array([rng.choice(3, p=row) for row in probs])
    return y, X


class TestMultinomialFit(unittest.TestCase):
    def test_intercept_only_reproduces_frequencies(self):
        y = np.array([0] * 5 + [1] * 3 + [2] * 2)
        X = DesignMatrix.from_columns([], len(y))
        fit = fit_multinomial(y, X)
        self.assertTrue(fit.converged)
        probs = predict_proba(fit, X)
        np.testing.assert_allclose(probs[0], [0.5, 0.3, 0.2], atol=1e-8)
        self.assertAlmostEqual(fit.coefficient(1, "intercept"), np.log(0.3 / 0.5), places=7)

    def test_balanced_outcome_gives_thirds(self):
        y = np.array([0, 1, 2] * 4)
        X = DesignMatrix.from_columns([], len(y))
        np.testing.assert_allclose(predict_proba(fit_multinomial(y, X), X), 1 / 3, atol=1e-10)

    def test_score_vanishes_and_matches_optimizer(self):
        y, X = simulated_multinomial(200, seed=3)
        fit = fit_multinomial(y, X, tol=1e-10)
        score = multinomial_score(np.asarray(fit.coefficients), y, X.values)
        self.assertLess(np.max(np.abs(score)), 1e-8)

        shape = fit.coefficients.shape
        oracle = optimize.minimize(
            lambda b: -multinomial_log_likelihood(b.reshape(shape), y, X.values),
            np.zeros(shape).ravel(),
            jac=lambda b: -multinomial_score(b.reshape(shape), y, X.values).ravel(),
            method="BFGS",
            options={"gtol": 1e-9},
        )
        np.testing.assert_allclose(fit.coefficients.ravel(), oracle.x, atol=1e-5)

    def test_log_likelihood_history_increases(self):
        y, X = simulated_multinomial(150, seed=5)
        fit = fit_multinomial(y, X)
        self.assertTrue(np.all(np.diff(fit.ll_history) >= 0))
        self.assertEqual(fit.log_likelihood, fit.ll_history[-1])

    def test_mean_prediction_matches_frequencies(self):
        y, X = simulated_multinomial(300, seed=11)
        fit = fit_multinomial(y, X)
        expected = np.bincount(y, minlength=3) / len(y)
        np.testing.assert_allclose(predict_proba(fit, X).mean(axis=0), expected, atol=1e-7)

    def test_predictions_invariant_to_affine_rescaling(self):
        y, X = simulated_multinomial(250, seed=13)
        x, z = X.values[:, 1], X.values[:, 2]
        rescaled = DesignMatrix.from_columns([("x", 3.0 * x + 2.0), ("z", 1.0 - z)], len(y))

        fit = fit_multinomial(y, X, tol=1e-10)
        refit = fit_multinomial(y, rescaled, tol=1e-10)
        np.testing.assert_allclose(predict_proba(refit, rescaled), predict_proba(fit, X), atol=1e-8)
        self.assertAlmostEqual(refit.log_likelihood, fit.log_likelihood, places=8)

    def test_stalled_ascent_is_not_convergence(self):
        y, X = simulated_multinomial(200, seed=17)
        calls = {"n": 0}

        def descending(beta, y_, X_):
            calls["n"] += 1
            value = multinomial_log_likelihood(beta, y_, X_)
            # Every trial step after the starting point looks worse
            return value if calls["n"] == 1 else value - 1e6

        with patch("src.estimation.glm.multinomial_log_likelihood", side_effect=descending):
            with self.assertRaises(NotConverged):
                fit_multinomial(y, X)

    def test_unobserved_category(self):
        y = np.array([0, 1, 0, 1, 1])
        with self.assertRaises(DegenerateInput):
            fit_multinomial(y, DesignMatrix.from_columns([], len(y)))

    def test_rank_deficient_design(self):
        x = np.arange(9, dtype=float)
        X = DesignMatrix.from_columns([("x", x), ("x_copy", 2 * x)], 9)
        with self.assertRaises(RankDeficient):
            fit_multinomial(np.array([0, 1, 2] * 3), X)


class TestMultinomialDerivatives(unittest.TestCase):
    def setUp(self):
        self.y, self.X = simulated_multinomial(60, seed=7)
        self.beta = np.array([[0.2, -0.3, 0.1], [-0.4, 0.5, 0.2]])

    def test_score_matches_finite_differences(self):
        h = 1e-5
        for seed in range(50):
            with self.subTest(seed=seed):
                rng = np.random.default_rng(1000 + seed)
                n = int(rng.integers(30, 120))
                X = DesignMatrix.from_columns(
                    [("x", rng.normal(size=n)), ("z", rng.binomial(1, 0.5, size=n))], n
                ).values
                y = rng.integers(0, 3, size=n)
                beta = rng.normal(scale=0.7, size=(2, 3))

                numeric = np.empty_like(beta)
                for k in range(2):
                    for j in range(3):
                        up, down = beta.copy(), beta.copy()
                        up[k, j] += h
                        down[k, j] -= h
                        numeric[k, j] = (
                            multinomial_log_likelihood(up, y, X) - multinomial_log_likelihood(down, y, X)
                        ) / (2 * h)
                np.testing.assert_allclose(multinomial_score(beta, y, X), numeric, rtol=1e-5, atol=1e-6)

    def test_information_is_negative_score_jacobian(self):
        info = multinomial_information(self.beta, self.X.values)
        h = 1e-6
        flat = self.beta.ravel()
        for i in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[i] += h
            down[i] -= h
            column = (
                multinomial_score(up.reshape(2, 3), self.y, self.X.values).ravel()
                - multinomial_score(down.reshape(2, 3), self.y, self.X.values).ravel()
            ) / (2 * h)
            np.testing.assert_allclose(info[:, i], -column, atol=1e-4)


class TestPredictProba(unittest.TestCase):
    def setUp(self):
        self.X = DesignMatrix.from_columns([("x", [0.0, 1.0, -2.0])], 3)

    def _fit(self, coefficients) -> MultinomialFit:
        return MultinomialFit(
            columns=self.X.columns,
            coefficients=np.asarray(coefficients, dtype=float),
            log_likelihood=0.0,
            converged=True,
            n_iter=0,
        )

    def test_zero_coefficients(self):
        probs = predict_proba(self._fit(np.zeros((2, 2))), self.X)
        np.testing.assert_allclose(probs, 1 / 3)

    def test_rows_sum_to_one(self):
        probs = predict_proba(self._fit([[1.0, -2.0], [0.5, 3.0]]), self.X)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0)
        self.assertTrue(np.all(probs > 0))

    def test_large_intercept_dominates(self):
        previous = 0.0
        for intercept in (1.0, 5.0, 20.0, 50.0):
            p1 = predict_proba(self._fit([[intercept, 0.0], [0.0, 0.0]]), self.X)[0, 1]
            self.assertGreater(p1, previous)
            previous = p1
        self.assertAlmostEqual(previous, 1.0, places=12)

    def test_column_mismatch(self):
        other = DesignMatrix.from_columns([("w", [0.0, 1.0, -2.0])], 3)
        with self.assertRaises(ColumnMismatch):
            predict_proba(self._fit(np.zeros((2, 2))), other)


if __name__ == '__main__':
    unittest.main()

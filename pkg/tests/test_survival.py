import sys
import unittest
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.estimation.base import Collinear, DegenerateGroups, MedianUndefined, MonotoneLikelihood, NoEvents
from src.estimation.survival import (
    COX_TERMS,
    CoxFit,
    CumulativeHazard,
    TieMethod,
    breslow_cumulative_hazard,
    cox_design,
    cox_partial_likelihood,
    fit_weighted_cox,
    kaplan_meier,
    logrank_test,
    nelson_aalen,
    predict_survival,
    reverse_kaplan_meier_median,
    survival_curves,
)

# Eight subjects with a tied event/censoring at t = 2
FIXTURE_TIMES = np.array([1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0])
FIXTURE_EVENTS = np.array([1, 1, 0, 1, 0, 1, 0, 1])


def exponential_data(n: int, seed: int, log_hr: float = 0.7, ties: bool = False):
    rng = np.random.default_rng(seed)
    x = rng.binomial(1, 0.5, n).astype(float)
    event_time = rng.exponential(1.0 / (0.1 * np.exp(log_hr * x)))
    censor_time = rng.exponential(20.0, n)
    times = np.minimum(event_time, censor_time)
    if ties:
        times = np.ceil(times)
    return times, (event_time <= censor_time).astype(int), x[:, None]


class TestKaplanMeier(unittest.TestCase):
    def test_hand_computed_fixture(self):
        curve = kaplan_meier(FIXTURE_TIMES, FIXTURE_EVENTS)
        np.testing.assert_allclose(curve.times, [1, 2, 3, 5, 7])
        np.testing.assert_allclose(curve.survival, [7 / 8, 6 / 8, 0.6, 0.4, 0.0])
        self.assertEqual(curve(0.5), 1.0)
        self.assertAlmostEqual(curve(2.0), 0.75, places=12)
        self.assertEqual(curve.median(), 5.0)

    def test_single_event(self):
        curve = kaplan_meier([5.0], [1])
        self.assertEqual(curve(4.999), 1.0)
        self.assertEqual(curve(5.0), 0.0)

    def test_no_events(self):
        curve = kaplan_meier([1.0, 2.0, 3.0], [0, 0, 0])
        np.testing.assert_array_equal(curve([0.0, 2.5, 100.0]), [1.0, 1.0, 1.0])
        with self.assertRaises(MedianUndefined):
            curve.median()

    def test_duplicated_subject_equals_double_weight(self):
        weights = np.ones(8)
        weights[3] = 2.0
        duplicated = kaplan_meier(np.append(FIXTURE_TIMES, 3.0), np.append(FIXTURE_EVENTS, 1))
        weighted = kaplan_meier(FIXTURE_TIMES, FIXTURE_EVENTS, weights)
        np.testing.assert_allclose(weighted.survival, duplicated.survival)

    def test_nelson_aalen(self):
        hazard = nelson_aalen(FIXTURE_TIMES, FIXTURE_EVENTS)
        np.testing.assert_allclose(hazard.values, np.cumsum([1 / 8, 1 / 7, 1 / 5, 1 / 3, 1 / 1]))
        self.assertEqual(hazard(0.0), 0.0)


class TestFollowUp(unittest.TestCase):
    def test_all_censored(self):
        self.assertEqual(reverse_kaplan_meier_median([7.0] * 5, [0] * 5), 7.0)

    def test_mixed_fixture(self):
        # censorings at 2 (7 at risk), 4 (4 at risk), 6 (2 at risk)
        self.assertEqual(reverse_kaplan_meier_median(FIXTURE_TIMES, FIXTURE_EVENTS), 6.0)

    def test_nothing_censored(self):
        with self.assertRaises(MedianUndefined):
            reverse_kaplan_meier_median([1.0, 2.0], [1, 1])


class TestLogRank(unittest.TestCase):
    def test_identical_groups(self):
        times = np.concatenate([FIXTURE_TIMES, FIXTURE_TIMES])
        events = np.concatenate([FIXTURE_EVENTS, FIXTURE_EVENTS])
        result = logrank_test(times, events, [0] * 8 + [1] * 8)
        self.assertAlmostEqual(result.statistic, 0.0, places=12)
        self.assertAlmostEqual(result.p_value, 1.0, places=12)
        self.assertEqual(result.df, 1)

    def test_hand_computed_two_groups(self):
        result = logrank_test([1.0, 3.0, 2.0, 4.0], [1, 1, 1, 1], ["A", "A", "B", "B"])
        self.assertAlmostEqual(result.statistic, 8 / 13, places=10)
        self.assertAlmostEqual(result.expected[0], 4 / 3, places=12)
        self.assertEqual(result.observed, (2.0, 2.0))

    def test_separated_groups(self):
        rng = np.random.default_rng(1)
        times = np.concatenate([rng.exponential(10.0, 1000), rng.exponential(1.0, 1000)])
        result = logrank_test(times, np.ones(2000), [0] * 1000 + [1] * 1000)
        self.assertLess(result.p_value, 1e-6)

    def test_three_groups_degrees_of_freedom(self):
        result = logrank_test(FIXTURE_TIMES, FIXTURE_EVENTS, [0, 1, 2, 0, 1, 2, 0, 1])
        self.assertEqual(result.df, 2)
        self.assertGreaterEqual(result.p_value, 0.0)

    def test_single_group(self):
        with self.assertRaises(DegenerateGroups):
            logrank_test(FIXTURE_TIMES, FIXTURE_EVENTS, [0] * 8)


class TestPartialLikelihood(unittest.TestCase):
    def setUp(self):
        times, events, x = exponential_data(80, seed=4, ties=True)
        rng = np.random.default_rng(4)
        self.times = times
        self.events = events
        self.design = np.column_stack([x[:, 0], rng.normal(size=80)])
        self.weights = rng.uniform(0.5, 2.0, 80)
        self.beta = np.array([0.3, -0.2])

    def _check_derivatives(self, tie_method):
        def evaluate(beta):
            return cox_partial_likelihood(beta, self.times, self.events, self.design, self.weights, tie_method)

        _, grad, info = evaluate(self.beta)
        h = 1e-6
        for j in range(2):
            up, down = self.beta.copy(), self.beta.copy()
            up[j] += h
            down[j] -= h
            self.assertAlmostEqual(grad[j], (evaluate(up)[0] - evaluate(down)[0]) / (2 * h), places=4)
            np.testing.assert_allclose(info[:, j], -(evaluate(up)[1] - evaluate(down)[1]) / (2 * h), atol=1e-4)

    def test_breslow_derivatives(self):
        self._check_derivatives(TieMethod.BRESLOW)

    def test_efron_derivatives(self):
        self._check_derivatives("efron")

    def test_efron_equals_breslow_without_ties(self):
        times, events, x = exponential_data(200, seed=9)
        breslow = fit_weighted_cox(times, events, x)
        efron = fit_weighted_cox(times, events, x, tie_method="efron")
        np.testing.assert_allclose(breslow.coefficients, efron.coefficients, atol=1e-10)


class TestWeightedCox(unittest.TestCase):
    def test_unit_weights_equal_unweighted_fit(self):
        times, events, x = exponential_data(300, seed=2)
        unweighted = fit_weighted_cox(times, events, x)
        weighted = fit_weighted_cox(times, events, x, np.ones(300))
        np.testing.assert_allclose(weighted.coefficients, unweighted.coefficients, atol=1e-8)
        self.assertEqual(unweighted.terms, ("x0",))

    def test_duplication_equals_double_weight(self):
        times, events, x = exponential_data(120, seed=6)
        weights = np.ones(120)
        weights[:30] = 2.0
        duplicated = fit_weighted_cox(
            np.concatenate([times, times[:30]]),
            np.concatenate([events, events[:30]]),
            np.vstack([x, x[:30]]),
        )
        weighted = fit_weighted_cox(times, events, x, weights)
        np.testing.assert_allclose(weighted.coefficients, duplicated.coefficients, atol=1e-8)
        np.testing.assert_allclose(weighted.baseline.values, duplicated.baseline.values, rtol=1e-7)

    def test_duplicated_cohort_halves_model_covariance(self):
        times, events, x = exponential_data(150, seed=8)
        single = fit_weighted_cox(times, events, x)
        doubled = fit_weighted_cox(np.tile(times, 2), np.tile(events, 2), np.vstack([x, x]))
        np.testing.assert_allclose(doubled.coefficients, single.coefficients, atol=1e-8)
        np.testing.assert_allclose(doubled.model_covariance, 0.5 * single.model_covariance, rtol=1e-6)

    def test_rescaled_weights_leave_estimates_unchanged(self):
        times, events, x = exponential_data(200, seed=9, ties=True)
        design = np.column_stack([x[:, 0], np.random.default_rng(9).normal(size=200)])
        weights = np.random.default_rng(10).uniform(0.3, 3.0, size=200)
        for tie_method in (TieMethod.BRESLOW, TieMethod.EFRON):
            with self.subTest(tie_method=tie_method.value):
                base = fit_weighted_cox(times, events, design, weights, tie_method=tie_method, tol=1e-12)
                scaled = fit_weighted_cox(times, events, design, 7.5 * weights, tie_method=tie_method, tol=1e-12)
                np.testing.assert_allclose(scaled.coefficients, base.coefficients, atol=1e-8)
                np.testing.assert_allclose(scaled.robust_covariance, base.robust_covariance, rtol=1e-6)
                np.testing.assert_allclose(scaled.baseline.values, base.baseline.values, rtol=1e-7)

    def test_log_likelihood_history_never_decreases(self):
        times, events, x = exponential_data(250, seed=12, log_hr=1.2, ties=True)
        design = np.column_stack([x[:, 0], np.random.default_rng(12).normal(size=250)])
        weights = np.random.default_rng(13).uniform(0.5, 2.0, size=250)
        for tie_method in (TieMethod.BRESLOW, TieMethod.EFRON):
            with self.subTest(tie_method=tie_method.value):
                fit = fit_weighted_cox(times, events, design, weights, tie_method=tie_method)
                history = np.asarray(fit.ll_history)
                self.assertGreaterEqual(len(history), 2)
                self.assertTrue(np.all(np.diff(history) >= 0))
                self.assertEqual(fit.log_likelihood, history[-1])

    def test_matches_direct_newton_solution(self):
        times = np.arange(1.0, 11.0)
        events = np.array([1, 1, 0, 1, 1, 0, 1, 1, 0, 1])
        x = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0])

        # One-covariate Breslow partial likelihood solved term by term
        beta = 0.0
        for _ in range(100):
            score, information = 0.0, 0.0
            for i in np.flatnonzero(events):
                at_risk = x[times >= times[i]]
                risk = np.exp(beta * at_risk)
                first = np.sum(risk * at_risk) / np.sum(risk)
                second = np.sum(risk * at_risk ** 2) / np.sum(risk)
                score += x[i] - first
                information += second - first ** 2
            beta += score / information

        fit = fit_weighted_cox(times, events, x[:, None], np.ones(10), tol=1e-12)
        self.assertAlmostEqual(fit.coefficients[0], beta, delta=1e-8)
        self.assertAlmostEqual(fit.model_covariance[0, 0], 1.0 / information, delta=1e-8)

    def test_baseline_at_zero_is_nelson_aalen(self):
        times, events, x = exponential_data(100, seed=3, ties=True)
        baseline = breslow_cumulative_hazard(times, events, x, None, np.zeros(1))
        reference = nelson_aalen(times, events)
        np.testing.assert_allclose(baseline.times, reference.times)
        np.testing.assert_allclose(baseline.values, reference.values)

    @pytest.mark.slow
    def test_recovers_log_hazard_ratio(self):
        times, events, x = exponential_data(20000, seed=11)
        fit = fit_weighted_cox(times, events, x)
        self.assertLess(abs(fit.coefficients[0] - 0.7), 0.05)
        robust, model = fit.standard_errors(True)[0], fit.standard_errors(False)[0]
        self.assertAlmostEqual(robust / model, 1.0, delta=0.1)

    def test_summary_columns(self):
        times, events, x = exponential_data(400, seed=5)
        design = np.column_stack([x[:, 0], np.random.default_rng(5).normal(size=400)])
        fit = fit_weighted_cox(times, events, design, terms=("x", "z"))
        summary = fit.summary()
        self.assertEqual(list(summary["term"]), ["x", "z"])
        self.assertTrue((summary["lower"] < summary["coef"]).all())
        self.assertTrue((summary["p_value"].between(0, 1)).all())
        self.assertEqual(fit.n_events, int(events.sum()))
        self.assertEqual(fit.to_dict()["terms"], ["x", "z"])

    def test_no_events(self):
        with self.assertRaises(NoEvents):
            fit_weighted_cox([1.0, 2.0, 3.0], [0, 0, 0], np.array([[0.0], [1.0], [0.0]]))

    def test_collinear_design(self):
        times, events, x = exponential_data(50, seed=1)
        with self.assertRaises(Collinear):
            fit_weighted_cox(times, events, np.hstack([x, 2 * x]))

    def test_monotone_likelihood(self):
        times = np.concatenate([np.arange(1.0, 11.0), np.full(10, 20.0)])
        events = np.concatenate([np.ones(10), np.zeros(10)])
        x = np.concatenate([np.zeros(10), np.ones(10)])[:, None]
        with self.assertRaises(MonotoneLikelihood):
            fit_weighted_cox(times, events, x)


class TestPrediction(unittest.TestCase):
    def _fit(self, coefficients) -> CoxFit:
        zero = np.zeros((5, 5))
        return CoxFit(
            terms=COX_TERMS,
            coefficients=np.asarray(coefficients, dtype=float),
            model_covariance=zero,
            robust_covariance=zero,
            baseline=CumulativeHazard(np.array([1.0, 2.0, 4.0]), np.array([0.1, 0.3, 0.6])),
            log_likelihood=0.0,
            n_iter=0,
            converged=True,
            tie_method="breslow",
            n_subjects=10,
            n_events=3,
        )

    def test_zero_coefficients(self):
        curve = predict_survival(self._fit(np.zeros(5)), 2, 1)
        np.testing.assert_allclose(curve.survival, np.exp([-0.1, -0.3, -0.6]))

    def test_pattern_risk(self):
        fit = self._fit([0.5, 0.0, 0.0, 0.0, 0.2])
        curve = predict_survival(fit, 1, 1)
        np.testing.assert_allclose(curve.survival, np.exp(-np.array([0.1, 0.3, 0.6]) * np.exp(0.7)))

    def test_curves_start_at_one(self):
        frame = survival_curves(self._fit(np.zeros(5)), [(0, 0), (2, 1)])
        self.assertEqual(len(frame), 8)
        self.assertTrue((frame.loc[frame["time"] == 0.0, "survival"] == 1.0).all())

    def test_cox_design(self):
        design = cox_design([0, 1, 2, 1], [0, 1, 1, 0])
        np.testing.assert_array_equal(
            design,
            [[0, 0, 0, 0, 0], [1, 0, 1, 0, 1], [0, 1, 0, 1, 1], [1, 0, 0, 0, 0]],
        )


if __name__ == '__main__':
    unittest.main()

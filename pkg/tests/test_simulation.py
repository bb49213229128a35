import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
sys.path.insert(0, str(Path(__file__).parent.parent))

from fixtures import simulated_frame

from src.covariates import derive_all
from src.estimation.base import PositivityFloorViolated
from src.estimation.cohort import chi_squared_independence
from src.estimation.effects import cate_grid
from src.estimation.iptw import stabilized_weights
from src.estimation.survival import cox_design, fit_weighted_cox, kaplan_meier
from src.records import apply_eligibility, read_patients, write_patients
from src.simulation import PRESETS, SimConfig, SimTruth, preset, simulate, true_cate


class TestSimConfig(unittest.TestCase):
    def test_presets_validate(self):
        for name in PRESETS:
            config = preset(name)
            self.assertIsInstance(config, SimConfig)

    def test_unknown_preset(self):
        with self.assertRaises(ValueError):
            preset("gentle")

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            SimConfig(n=0)
        with self.assertRaises(ValueError):
            SimConfig(age_probs=(0.5, 0.5, 0.5))
        with self.assertRaises(ValueError):
            SimConfig(beta=(0.1, 0.2))

    def test_dict_round_trip(self):
        config = preset("strong", n=300, seed=4)
        self.assertEqual(SimConfig.from_dict(config.to_dict()), config)

    def test_unknown_key(self):
        with self.assertRaises(ValueError):
            SimConfig.from_dict({"n": 10, "sample_size": 10})


class TestSimulate(unittest.TestCase):
    def setUp(self):
        """Set up test environment before each test"""
        self.test_dir = Path(tempfile.mkdtemp(prefix="rdicausal_test_"))

    def tearDown(self):
        """Clean up after each test"""
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_same_seed_same_dataset(self):
        first = simulate(preset(n=50, seed=3))
        second = simulate(preset(n=50, seed=3))
        self.assertEqual(first.records, second.records)
        self.assertNotEqual(first.records, simulate(preset(n=50, seed=4)).records)

    def test_records_survive_ingestion(self):
        result = simulate(preset(n=120, seed=1, missing_hre_fraction=0.1, incomplete_treatment_fraction=0.1))
        write_patients(result.records, self.test_dir)
        self.assertEqual(read_patients(self.test_dir), result.records)

    def test_derivation_matches_assignments(self):
        result = simulate(preset(n=400, seed=6))
        derived = derive_all(result.records)
        for truth, observed in zip(result.covariates, derived):
            self.assertEqual(observed.id, truth.id)
            self.assertEqual(observed.exposure, truth.exposure)
            self.assertEqual(observed.effect_modifier, truth.effect_modifier)
            self.assertAlmostEqual(observed.rdi, truth.rdi, places=12)
            self.assertEqual(observed.motox, truth.motox)

    def test_injected_exclusions(self):
        result = simulate(
            preset(
                n=300,
                seed=2,
                missing_hre_fraction=0.1,
                incomplete_treatment_fraction=0.1,
                event_during_treatment_fraction=0.05,
            )
        )
        excluded = dict(apply_eligibility(result.records).excluded)
        for reason, ids in result.injected.items():
            for patient_id in ids:
                self.assertIn(patient_id, excluded)
        missing = set(result.injected["missing HRe"])
        self.assertEqual({i for i, r in excluded.items() if r == "missing HRe"}, missing)
        self.assertEqual(len(excluded), len(set().union(*result.injected.values())))

    def test_exposure_probabilities_are_stochastic(self):
        result = simulate(preset(n=200, seed=8))
        probabilities = result.exposure_probabilities
        self.assertEqual(probabilities.shape, (200, 3))
        np.testing.assert_allclose(probabilities.sum(axis=1), 1.0)
        self.assertGreaterEqual(probabilities.min(), 0.02)

    def test_positivity_floor(self):
        with self.assertRaises(PositivityFloorViolated):
            simulate(preset("extreme", n=200, seed=1, positivity_floor=0.02))

    def test_every_sub_cohort_populated(self):
        frame, _ = simulated_frame(n=600, seed=1)
        counts = frame.groupby(["exposure", "effect_modifier"]).size()
        self.assertEqual(len(counts), 6)
        self.assertGreater(counts.min(), 10)

    def test_modifier_independent_of_exposure(self):
        frame, _ = simulated_frame(n=3000, seed=12)
        result = chi_squared_independence(frame["exposure"], frame["effect_modifier"])
        self.assertEqual(result.df, 2)
        self.assertGreater(result.p_value, 1e-3)


class TestTruth(unittest.TestCase):
    def setUp(self):
        self.truth = SimTruth(
            beta=(0.15, 0.40, -0.20, -0.30, -0.70), baseline_hazard=0.012, censoring_rate=0.006, seed=0, n=1
        )

    def test_numeric_integration_matches_closed_form(self):
        for a in (1, 2):
            for v in (0, 1):
                for t in (1.0, 24.0, 60.0):
                    self.assertAlmostEqual(true_cate(self.truth, a, v, t), self.truth.cate(a, v, t), places=6)

    def test_integration_stable_under_tighter_tolerance(self):
        loose = true_cate(self.truth, 2, 0, 60.0, epsabs=1e-6)
        tight = true_cate(self.truth, 2, 0, 60.0, epsabs=1e-8)
        self.assertAlmostEqual(loose, tight, delta=1e-5)

    def test_zero_horizon(self):
        self.assertEqual(true_cate(self.truth, 1, 0, 0.0), 0.0)
        self.assertAlmostEqual(true_cate(self.truth, 1, 0, 1e-6), 0.0, places=9)

    def test_unit_hazard_ratio_gives_zero(self):
        # A1 effect cancels for good responders: 0.15 - 0.15 = 0
        truth = SimTruth((0.15, 0.4, -0.15, 0.0, 0.0), 0.012, 0.006, 0, 1)
        self.assertAlmostEqual(truth.hazard_ratio(1, 1), 1.0)
        self.assertAlmostEqual(true_cate(truth, 1, 1, 60.0), 0.0, places=9)

    def test_signs_follow_hazard(self):
        # harmful reduction lowers restricted mean survival
        self.assertLess(self.truth.cate(1, 0, 60.0), 0.0)
        self.assertLess(self.truth.cate(2, 0, 60.0), 0.0)


class TestRecovery(unittest.TestCase):
    @pytest.mark.slow
    def test_null_effect_curves_agree(self):
        """
        Unweighted curves of a null dataset differ by sampling noise only.

        The smallest exposure x response cells hold about a thousand
        patients, and the largest gap between two independent Kaplan-Meier
        curves of that size over 121 grid points runs from 0.05 to 0.08
        across seeds, near the 99.9% two-sample Kolmogorov bound
        1.95 * sqrt(2 / 1000) = 0.087. A gap of 0.08 or more signals a
        dose effect leaking into the null preset.
        """
        frame, _ = simulated_frame(n=10000, seed=21, name="null")
        grid = np.linspace(0.0, 60.0, 121)
        for v in (0, 1):
            curves = []
            for a in (0, 1, 2):
                rows = frame[(frame["exposure"] == a) & (frame["effect_modifier"] == v)]
                curve = kaplan_meier(rows["efs_time_months"], rows["efs_event"])
                curves.append(curve(grid))
            for i in range(3):
                for j in range(i + 1, 3):
                    self.assertLess(np.max(np.abs(curves[i] - curves[j])), 0.08)

    @pytest.mark.slow
    def test_weighted_cox_recovers_cate(self):
        frame, result = simulated_frame(n=20000, seed=31)
        weights = stabilized_weights("IPTW1", frame).weights
        fit = fit_weighted_cox(
            frame["efs_time_months"],
            frame["efs_event"],
            cox_design(frame["exposure"], frame["effect_modifier"]),
            weights,
        )
        estimate = cate_grid(fit, [60.0])
        for a in (1, 2):
            self.assertLess(abs(estimate[a - 1, 0, 0] - true_cate(result.truth, a, 0, 60.0)), 1.0)

    @pytest.mark.slow
    def test_weighting_removes_toxicity_bias(self):
        # A1 log hazard ratio under strong toxicity confounding
        for seed in (100, 101, 102):
            with self.subTest(seed=seed):
                frame, result = simulated_frame(n=5000, seed=seed, name="strong")
                design = cox_design(frame["exposure"], frame["effect_modifier"])
                times, events = frame["efs_time_months"], frame["efs_event"]
                naive = fit_weighted_cox(times, events, design)
                weighted = fit_weighted_cox(times, events, design, stabilized_weights("IPTW1", frame).weights)
                truth = result.truth.beta[0]
                naive_se = naive.standard_errors(robust=True)[0]
                weighted_se = weighted.standard_errors(robust=True)[0]
                self.assertGreater(abs(naive.coefficients[0] - truth), 3 * naive_se)
                self.assertLessEqual(abs(weighted.coefficients[0] - truth), 1.96 * weighted_se)


if __name__ == '__main__':
    unittest.main()

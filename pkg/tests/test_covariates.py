import sys
import unittest
from itertools import product
from pathlib import Path

from hypothesis import given
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))
sys.path.insert(0, str(Path(__file__).parent.parent))

from fixtures import grades, make_cycles, make_record

from src.covariates import (
    DERIVED_COLUMNS,
    MOTOX_KEYS,
    build_analysis_frame,
    classify_effect_modifier,
    classify_exposure,
    covariates_to_frame,
    derive_all,
    derive_covariates,
    frame_to_covariates,
    motox_score,
    standardized_dose,
    standardized_time,
)
from src.records.base import (
    GENERIC_TOXICITIES,
    RULE_TOXICITIES,
    IncompleteTreatment,
    InvariantViolation,
    MissingField,
    NonPositiveDuration,
    Period,
    ToxicitySet,
)
from src.records.patient import CycleRecord, PeriodToxicity


def period_grades(**overrides) -> PeriodToxicity:
    return PeriodToxicity(Period.PRE, grades(**overrides))


class TestStandardizedDose(unittest.TestCase):
    def test_full_adherence(self):
        self.assertAlmostEqual(standardized_dose(make_cycles()), 1.0, places=12)

    def test_no_drug_received(self):
        self.assertEqual(standardized_dose(make_cycles(cddp=0.0, dox=0.0)), 0.0)

    def test_half_dose_last_cycle(self):
        cycles = make_cycles()[:5] + (CycleRecord(6, 50.0, 37.5, 119),)
        self.assertAlmostEqual(standardized_dose(cycles), 11 / 12, places=12)

    def test_requires_six_cycles(self):
        with self.assertRaises(IncompleteTreatment):
            standardized_dose(make_cycles(n=5))


class TestStandardizedTime(unittest.TestCase):
    def test_protocol_schedule(self):
        self.assertAlmostEqual(standardized_time(make_cycles()), 1.0, places=12)

    def test_delayed_schedule(self):
        starts = tuple(round(day * 141.4 / 119, 6) for day in (0, 21, 42, 77, 98, 119))
        self.assertAlmostEqual(standardized_time(make_cycles(starts=starts)), 144.4 / 122, places=6)

    def test_compressed_schedule(self):
        gamma = standardized_time(make_cycles(starts=(0, 20, 40, 60, 80, 100)))
        self.assertAlmostEqual(gamma, 103 / 122, places=12)
        self.assertLess(gamma, 1.0)

    def test_non_positive_duration(self):
        with self.assertRaises(NonPositiveDuration):
            standardized_time(make_cycles(starts=(0, 0, 0, 0, 0, -3)))


class TestClassification(unittest.TestCase):
    def test_exposure_thresholds(self):
        self.assertEqual(classify_exposure(0.85), 0)
        self.assertEqual(classify_exposure(1.2), 0)
        self.assertEqual(classify_exposure(0.8499), 1)
        self.assertEqual(classify_exposure(0.70), 1)
        self.assertEqual(classify_exposure(0.6999), 2)
        self.assertEqual(classify_exposure(0.376), 2)

    def test_exposure_rejects_nan(self):
        with self.assertRaises(ValueError):
            classify_exposure(float("nan"))

    def test_effect_modifier_threshold(self):
        self.assertEqual(classify_effect_modifier(0.90), 1)
        self.assertEqual(classify_effect_modifier(1.0), 1)
        self.assertEqual(classify_effect_modifier(0.899), 0)
        self.assertEqual(classify_effect_modifier(0.0), 0)

    def test_effect_modifier_range(self):
        with self.assertRaises(ValueError):
            classify_effect_modifier(90.0)


class TestMotoxScore(unittest.TestCase):
    def test_all_zero(self):
        self.assertEqual(motox_score(period_grades(), ToxicitySet.RULE), 0.0)
        self.assertEqual(motox_score(period_grades(), ToxicitySet.GEN), 0.0)

    def test_single_rule_toxicity(self):
        score = motox_score(period_grades(leucopenia=4), ToxicitySet.RULE)
        self.assertAlmostEqual(score, 4 / 6 + 4, places=12)

    def test_generic_grade_three(self):
        self.assertEqual(motox_score(period_grades(nausea_vomiting=3), ToxicitySet.GEN), 4.5)

    def test_generic_grade_pairs(self):
        for nausea, infection in product(range(5), repeat=2):
            score = motox_score(period_grades(nausea_vomiting=nausea, infection=infection), ToxicitySet.GEN)
            self.assertEqual(score, (nausea + infection) / 2 + max(nausea, infection))

    def test_generic_set_ignores_rule_toxicities(self):
        score = motox_score(period_grades(leucopenia=4, cardiotoxicity=3), ToxicitySet.GEN)
        self.assertEqual(score, 0.0)

    @given(
        values=st.lists(st.integers(min_value=0, max_value=4), min_size=6, max_size=6),
        position=st.integers(min_value=0, max_value=5),
    )
    def test_rule_score_monotone_in_each_grade(self, values, position):
        base = dict(zip(RULE_TOXICITIES, values))
        score = motox_score(period_grades(**base), ToxicitySet.RULE)
        self.assertGreaterEqual(score, 0.0)
        self.assertLessEqual(score, 8.0)
        if values[position] < 4:
            bumped = dict(base)
            bumped[RULE_TOXICITIES[position]] += 1
            self.assertGreater(motox_score(period_grades(**bumped), ToxicitySet.RULE), score)

    @given(st.lists(st.integers(min_value=0, max_value=4), min_size=2, max_size=2))
    def test_generic_score_bounds(self, values):
        score = motox_score(period_grades(**dict(zip(GENERIC_TOXICITIES, values))), ToxicitySet.GEN)
        self.assertGreaterEqual(score, max(values))
        self.assertLessEqual(score, 2 * max(values))


class TestDeriveCovariates(unittest.TestCase):
    def test_compliant_patient(self):
        derived = derive_covariates(make_record(pre=grades(leucopenia=4), post=grades(infection=2)))
        self.assertAlmostEqual(derived.rdi, 1.0, places=12)
        self.assertEqual(derived.exposure, 0)
        self.assertEqual(derived.effect_modifier, 1)
        self.assertAlmostEqual(derived.motox_score(ToxicitySet.RULE, Period.PRE), 4 / 6 + 4)
        self.assertEqual(derived.motox_score(ToxicitySet.GEN, Period.POST), 3.0)
        self.assertEqual(derived.motox_score(ToxicitySet.RULE, Period.POST), 0.0)

    def test_rdi_exactly_at_threshold(self):
        derived = derive_covariates(make_record(cycles=make_cycles(cddp=85.0, dox=63.75)))
        self.assertAlmostEqual(derived.rdi, 0.85, places=12)
        self.assertEqual(derived.exposure, 0)

    def test_delay_lowers_rdi(self):
        derived = derive_covariates(
            make_record(cycles=make_cycles(starts=(0, 30, 60, 110, 140, 179)), necrosis=0.5)
        )
        self.assertAlmostEqual(derived.gamma, 182 / 122)
        self.assertAlmostEqual(derived.rdi, 122 / 182)
        self.assertEqual(derived.exposure, 2)
        self.assertEqual(derived.effect_modifier, 0)

    def test_missing_hre(self):
        with self.assertRaises(MissingField):
            derive_covariates(make_record(necrosis=None))

    def test_derive_all_names_patient(self):
        records = [make_record("OK"), make_record("SHORT", cycles=make_cycles(n=4))]
        with self.assertRaises(InvariantViolation) as ctx:
            derive_all(records)
        self.assertEqual(ctx.exception.patient_id, "SHORT")

    def test_frame_round_trip(self):
        records = [make_record("A"), make_record("B", pre=grades(nausea_vomiting=3), necrosis=0.2)]
        derived = derive_all(records)
        frame = covariates_to_frame(derived)
        self.assertEqual(tuple(frame.columns), DERIVED_COLUMNS)
        self.assertEqual(frame_to_covariates(frame), derived)
        self.assertEqual(len(MOTOX_KEYS), 4)

    def test_analysis_frame_joins_outcome(self):
        records = [make_record("A", time=10.0, event=True)]
        frame = build_analysis_frame(records, derive_all(records))
        self.assertEqual(frame.loc[0, "efs_event"], 1)
        self.assertEqual(frame.loc[0, "trial"], "BO03")
        self.assertEqual(frame.loc[0, "efs_time_months"], 10.0)

    def test_analysis_frame_missing_record(self):
        derived = derive_all([make_record("A")])
        with self.assertRaises(MissingField):
            build_analysis_frame([make_record("B")], derived)


if __name__ == '__main__':
    unittest.main()

"""
Patient-level derived quantities consumed by the weighting and outcome models.

For a patient with six recorded cycles:

- standardized dose: average over both drugs and all cycles of the received
  dose relative to the protocol dose (100 mg/m2 cisplatin, 75 mg/m2
  doxorubicin)
- standardized time: actual treatment time, from the start of cycle 1 to the
  third day of cycle 6, relative to the anticipated 122 days
- received dose intensity (RDI): standardized dose over standardized time
- exposure: 0 (standard, RDI >= 0.85), 1 (reduced, 0.70 <= RDI < 0.85) or
  2 (highly reduced, RDI < 0.70)
- effect modifier: 1 for good histological response (necrosis >= 90%)
- MOTox scores: mean plus maximum CTCAE grade over the rule-specific and the
  generic toxicity set, in the pre- and post-operative period
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import pandas as pd

from .records.base import (
    ANTICIPATED_CDDP_MG_M2,
    ANTICIPATED_DOX_MG_M2,
    ANTICIPATED_TREATMENT_DAYS,
    CYCLE6_TREATMENT_DAYS,
    N_CYCLES,
    TOXICITY_SETS,
    DataError,
    IncompleteTreatment,
    InvariantViolation,
    MissingColumn,
    MissingField,
    NonPositiveDuration,
    Period,
    ToxicitySet,
)
from .records.patient import CycleRecord, PatientRecord, PeriodToxicity

logger = logging.getLogger(__name__)

STANDARD, REDUCED, HIGHLY_REDUCED = 0, 1, 2
EXPOSURE_LEVELS: Tuple[int, ...] = (STANDARD, REDUCED, HIGHLY_REDUCED)
STANDARD_RDI_THRESHOLD = 0.85
REDUCED_RDI_THRESHOLD = 0.70
GOOD_RESPONSE_THRESHOLD = 0.90
# Computed RDI is rounded before comparison so 0.85 from exact inputs stays 0.85
RDI_DECIMALS = 10

MOTOX_KEYS: Tuple[Tuple[ToxicitySet, Period], ...] = (
    (ToxicitySet.RULE, Period.PRE),
    (ToxicitySet.RULE, Period.POST),
    (ToxicitySet.GEN, Period.PRE),
    (ToxicitySet.GEN, Period.POST),
)

DERIVED_COLUMNS: Tuple[str, ...] = (
    "id",
    "delta",
    "gamma",
    "rdi",
    "exposure",
    "effect_modifier",
    "motox_rule_pre",
    "motox_rule_post",
    "motox_gen_pre",
    "motox_gen_post",
)


def motox_column(toxicity_set: ToxicitySet, period: Period) -> str:
    return f"motox_{toxicity_set.value}_{period.value}"


@dataclass(frozen=True)
class DerivedCovariates:
    """Derived quantities of one eligible patient"""

    id: str
    delta: float
    gamma: float
    rdi: float
    exposure: int
    effect_modifier: int
    motox: Mapping[Tuple[ToxicitySet, Period], float]

    def __post_init__(self):
        object.__setattr__(self, "motox", dict(self.motox))
        if self.exposure not in EXPOSURE_LEVELS:
            raise InvariantViolation(self.id, f"exposure must be 0, 1 or 2, got {self.exposure}")
        if self.effect_modifier not in (0, 1):
            raise InvariantViolation(self.id, f"effect modifier must be 0 or 1, got {self.effect_modifier}")
        for key in MOTOX_KEYS:
            if key not in self.motox:
                raise InvariantViolation(self.id, f"{motox_column(*key)} missing")
            if not 0.0 <= self.motox[key] <= 8.0:
                raise InvariantViolation(self.id, f"{motox_column(*key)} outside [0, 8]: {self.motox[key]}")

    def motox_score(self, toxicity_set: ToxicitySet, period: Period) -> float:
        return self.motox[(toxicity_set, period)]

    def as_row(self) -> Dict[str, object]:
        row: Dict[str, object] = {
            "id": self.id,
            "delta": self.delta,
            "gamma": self.gamma,
            "rdi": self.rdi,
            "exposure": self.exposure,
            "effect_modifier": self.effect_modifier,
        }
        for key in MOTOX_KEYS:
            row[motox_column(*key)] = self.motox[key]
        return row


def _require_full_treatment(cycles: Sequence[CycleRecord]) -> None:
    if len(cycles) < N_CYCLES:
        raise IncompleteTreatment(len(cycles))


def cycle_standardized_doses(cycles: Sequence[CycleRecord]) -> List[Tuple[float, float]]:
    """Per-cycle (cisplatin, doxorubicin) doses relative to the protocol dose"""
    return [
        (cycle.dose_cddp_mg_m2 / ANTICIPATED_CDDP_MG_M2, cycle.dose_dox_mg_m2 / ANTICIPATED_DOX_MG_M2)
        for cycle in cycles
    ]


def standardized_dose(cycles: Sequence[CycleRecord]) -> float:
    """Average relative dose over both drugs and the six cycles"""
    _require_full_treatment(cycles)
    relative = cycle_standardized_doses(cycles)
    total = math.fsum(cddp for cddp, _ in relative) + math.fsum(dox for _, dox in relative)
    return total / (2 * N_CYCLES)


def standardized_time(cycles: Sequence[CycleRecord]) -> float:
    """Actual over anticipated treatment time"""
    _require_full_treatment(cycles)
    by_index = sorted(cycles, key=lambda cycle: cycle.index)
    days = (by_index[-1].start_day + CYCLE6_TREATMENT_DAYS) - by_index[0].start_day
    if days <= 0:
        raise NonPositiveDuration(days)
    return days / ANTICIPATED_TREATMENT_DAYS


def classify_exposure(rdi: float) -> int:
    """Three-level exposure from RDI; both thresholds are inclusive from below"""
    if not math.isfinite(rdi):
        raise ValueError(f"RDI must be finite, got {rdi}")
    value = round(rdi, RDI_DECIMALS)
    if value >= STANDARD_RDI_THRESHOLD:
        return STANDARD
    if value >= REDUCED_RDI_THRESHOLD:
        return REDUCED
    return HIGHLY_REDUCED


def classify_effect_modifier(necrosis_pct: float) -> int:
    if not 0.0 <= necrosis_pct <= 1.0:
        raise ValueError(f"necrosis fraction must lie in [0, 1], got {necrosis_pct}")
    return 1 if necrosis_pct >= GOOD_RESPONSE_THRESHOLD else 0


def motox_score(grades: PeriodToxicity, toxicity_set: ToxicitySet) -> float:
    """Mean plus maximum grade over a toxicity set"""
    values = [grades.grade(name) for name in TOXICITY_SETS[ToxicitySet(toxicity_set)]]
    return math.fsum(values) / len(values) + max(values)


def derive_covariates(record: PatientRecord) -> DerivedCovariates:
    if record.hre_necrosis_pct is None:
        raise MissingField("hre_necrosis_pct", record.id)

    delta = standardized_dose(record.cycles)
    gamma = standardized_time(record.cycles)
    rdi = delta / gamma
    motox = {
        (toxicity_set, period): motox_score(record.period_toxicity(period), toxicity_set)
        for toxicity_set, period in MOTOX_KEYS
    }
    return DerivedCovariates(
        id=record.id,
        delta=delta,
        gamma=gamma,
        rdi=rdi,
        exposure=classify_exposure(rdi),
        effect_modifier=classify_effect_modifier(record.hre_necrosis_pct),
        motox=motox,
    )


def derive_all(records: Sequence[PatientRecord]) -> List[DerivedCovariates]:
    """Derive covariates for every record; errors name the offending patient"""
    derived = []
    for record in records:
        try:
            derived.append(derive_covariates(record))
        except (IncompleteTreatment, NonPositiveDuration) as e:
            raise InvariantViolation(record.id, str(e)) from e
    counts = [sum(1 for c in derived if c.exposure == level) for level in EXPOSURE_LEVELS]
    logger.info("Derived covariates for %d patients (exposure counts %s)", len(derived), counts)
    return derived


def covariates_to_frame(covariates: Sequence[DerivedCovariates]) -> pd.DataFrame:
    """Tabular form written to derived.csv"""
    return pd.DataFrame([c.as_row() for c in covariates], columns=list(DERIVED_COLUMNS))


def frame_to_covariates(frame: pd.DataFrame) -> List[DerivedCovariates]:
    for column in DERIVED_COLUMNS:
        if column not in frame.columns:
            raise MissingColumn(column, "derived covariates")
    result = []
    for row in frame.to_dict(orient="records"):
        result.append(
            DerivedCovariates(
                id=str(row["id"]),
                delta=float(row["delta"]),
                gamma=float(row["gamma"]),
                rdi=float(row["rdi"]),
                exposure=int(row["exposure"]),
                effect_modifier=int(row["effect_modifier"]),
                motox={key: float(row[motox_column(*key)]) for key in MOTOX_KEYS},
            )
        )
    return result


BASELINE_COLUMNS: Tuple[str, ...] = (
    "trial",
    "age_group",
    "gender",
    "efs_time_months",
    "efs_event",
)


def build_analysis_frame(
    records: Sequence[PatientRecord], covariates: Sequence[DerivedCovariates]
) -> pd.DataFrame:
    """
    Join baseline fields and outcome of each record with its derived
    covariates. Rows follow the order of ``covariates``.

    Raises:
        MissingField: a covariate row has no matching patient record
    """
    by_id = {record.id: record for record in records}
    rows = []
    for derived in covariates:
        record = by_id.get(derived.id)
        if record is None:
            raise MissingField("patient record", derived.id)
        row = derived.as_row()
        row.update(
            {
                "trial": record.trial.value,
                "age_group": record.age_group.value,
                "gender": record.gender.value,
                "efs_time_months": record.efs_time_months,
                "efs_event": int(record.efs_event),
            }
        )
        rows.append(row)
    if not rows:
        raise DataError("Analysis cohort is empty")
    return pd.DataFrame(rows, columns=list(DERIVED_COLUMNS + BASELINE_COLUMNS))

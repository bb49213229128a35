"""
Immutable patient-level records.

A PatientRecord bundles baseline covariates, per-cycle dosing, per-period
toxicity grades and the event-free survival outcome of one trial patient.
All invariants are enforced at construction, so a record that exists is a
record that downstream code may trust.
"""

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Tuple

from .base import (
    MAX_GRADE,
    MIN_GRADE,
    N_CYCLES,
    TOXICITY_NAMES,
    AgeGroup,
    Gender,
    InvariantViolation,
    Period,
    Trial,
)


@dataclass(frozen=True)
class CycleRecord:
    """Doses received and start day of one chemotherapy cycle"""

    index: int
    dose_cddp_mg_m2: float
    dose_dox_mg_m2: float
    start_day: int

    def validate(self, patient_id: Optional[str] = None) -> None:
        if not 1 <= self.index <= N_CYCLES:
            raise InvariantViolation(patient_id, f"cycle index {self.index} outside 1..{N_CYCLES}")
        for name, dose in (("dose_cddp", self.dose_cddp_mg_m2), ("dose_dox", self.dose_dox_mg_m2)):
            if not math.isfinite(dose) or dose < 0:
                raise InvariantViolation(patient_id, f"cycle {self.index}: {name} must be >= 0, got {dose}")
        if self.index == 1 and self.start_day != 0:
            raise InvariantViolation(patient_id, f"cycle 1 must start on day 0, got {self.start_day}")


@dataclass(frozen=True)
class PeriodToxicity:
    """Worst CTCAE grade of every tracked toxicity during one period"""

    period: Period
    grades: Mapping[str, int]

    def validate(self, patient_id: Optional[str] = None) -> None:
        missing = [name for name in TOXICITY_NAMES if name not in self.grades]
        if missing:
            raise InvariantViolation(
                patient_id, f"{self.period.value}-period toxicity missing: {', '.join(missing)}"
            )
        unknown = sorted(set(self.grades) - set(TOXICITY_NAMES))
        if unknown:
            raise InvariantViolation(patient_id, f"unknown toxicity: {', '.join(unknown)}")
        for name, grade in self.grades.items():
            if isinstance(grade, bool) or not isinstance(grade, int):
                raise InvariantViolation(patient_id, f"{name} grade must be an integer, got {grade!r}")
            if not MIN_GRADE <= grade <= MAX_GRADE:
                raise InvariantViolation(
                    patient_id,
                    f"{name} grade {grade} outside CTCAE range {MIN_GRADE}..{MAX_GRADE}",
                )

    def grade(self, name: str) -> int:
        return self.grades[name]


@dataclass(frozen=True)
class PatientRecord:
    """Canonical representation of one patient"""

    id: str
    trial: Trial
    age_group: AgeGroup
    gender: Gender
    cycles: Tuple[CycleRecord, ...]
    toxicity: Mapping[Period, PeriodToxicity]
    hre_necrosis_pct: Optional[float]
    efs_time_months: float
    efs_event: bool
    completed_treatment: bool = True
    had_surgery: bool = True
    event_during_treatment: bool = False

    def __post_init__(self):
        # Normalize containers so equality does not depend on the caller's types
        object.__setattr__(self, "cycles", tuple(self.cycles))
        object.__setattr__(self, "toxicity", dict(self.toxicity))
        self._validate()

    def _validate(self) -> None:
        if not self.id:
            raise InvariantViolation(self.id, "patient id must be non-empty")

        if not math.isfinite(self.efs_time_months) or self.efs_time_months < 0:
            raise InvariantViolation(self.id, f"efs_time_months must be >= 0, got {self.efs_time_months}")

        if self.hre_necrosis_pct is not None:
            if not 0.0 <= self.hre_necrosis_pct <= 1.0:
                raise InvariantViolation(
                    self.id, f"necrosis fraction must lie in [0, 1], got {self.hre_necrosis_pct}"
                )

        if len(self.cycles) > N_CYCLES:
            raise InvariantViolation(self.id, f"at most {N_CYCLES} cycles allowed, got {len(self.cycles)}")

        previous: Optional[CycleRecord] = None
        for cycle in self.cycles:
            cycle.validate(self.id)
            if previous is not None:
                if cycle.index <= previous.index:
                    raise InvariantViolation(self.id, "cycles must be ordered by distinct index")
                if cycle.start_day < previous.start_day:
                    raise InvariantViolation(
                        self.id, f"cycle {cycle.index} starts before cycle {previous.index}"
                    )
            previous = cycle

        for period in Period:
            if period not in self.toxicity:
                raise InvariantViolation(self.id, f"toxicity for period '{period.value}' missing")
            record = self.toxicity[period]
            if record.period is not period:
                raise InvariantViolation(self.id, f"toxicity keyed '{period.value}' holds '{record.period.value}'")
            record.validate(self.id)

    @property
    def n_cycles(self) -> int:
        return len(self.cycles)

    def period_toxicity(self, period: Period) -> PeriodToxicity:
        return self.toxicity[period]


def make_toxicity(pre: Mapping[str, int], post: Mapping[str, int]) -> Dict[Period, PeriodToxicity]:
    """Build the two-period toxicity mapping from plain grade dictionaries"""
    return {
        Period.PRE: PeriodToxicity(Period.PRE, dict(pre)),
        Period.POST: PeriodToxicity(Period.POST, dict(post)),
    }

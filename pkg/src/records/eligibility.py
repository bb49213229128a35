"""
Cohort selection following the trial flowchart.

Patients are screened in a fixed order and each excluded patient carries
the first reason that applies, so the per-stage counts add up to the
difference between the initial and final cohort sizes.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from .base import N_CYCLES
from .patient import PatientRecord

logger = logging.getLogger(__name__)

MISSING_HRE = "missing HRe"
INCOMPLETE_TREATMENT = "incomplete treatment"
INCOMPLETE_CYCLE_DATA = "incomplete cycle data"
NO_SURGERY = "no surgery"
EVENT_DURING_TREATMENT = "event during treatment"

# Order in which the stages are applied and reported
EXCLUSION_STAGES: Tuple[str, ...] = (
    MISSING_HRE,
    INCOMPLETE_TREATMENT,
    INCOMPLETE_CYCLE_DATA,
    NO_SURGERY,
    EVENT_DURING_TREATMENT,
)


def exclusion_reason(record: PatientRecord) -> Optional[str]:
    """First exclusion reason that applies to a patient, or None if eligible"""
    if record.hre_necrosis_pct is None:
        return MISSING_HRE
    if not record.completed_treatment:
        return INCOMPLETE_TREATMENT
    if record.n_cycles < N_CYCLES:
        # Reported as completed but not every cycle was recorded
        return INCOMPLETE_CYCLE_DATA
    if not record.had_surgery:
        return NO_SURGERY
    if record.event_during_treatment:
        return EVENT_DURING_TREATMENT
    return None


@dataclass(frozen=True)
class ConsortSummary:
    """Flowchart counts of a cohort selection"""

    initial: int
    stages: Tuple[Tuple[str, int], ...]
    excluded: Tuple[Tuple[str, str], ...]
    final: int

    def count(self, reason: str) -> int:
        return dict(self.stages)[reason]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "initial": self.initial,
            "stages": [{"reason": reason, "excluded": count} for reason, count in self.stages],
            "excluded": [{"id": patient_id, "reason": reason} for patient_id, reason in self.excluded],
            "final": self.final,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ConsortSummary":
        return cls(
            initial=int(payload["initial"]),
            stages=tuple((item["reason"], int(item["excluded"])) for item in payload["stages"]),
            excluded=tuple((item["id"], item["reason"]) for item in payload["excluded"]),
            final=int(payload["final"]),
        )


class EligibilityResult(NamedTuple):
    eligible: List[PatientRecord]
    excluded: List[Tuple[str, str]]

    def consort(self) -> ConsortSummary:
        counts = {reason: 0 for reason in EXCLUSION_STAGES}
        for _, reason in self.excluded:
            counts[reason] += 1
        return ConsortSummary(
            initial=len(self.eligible) + len(self.excluded),
            stages=tuple((reason, counts[reason]) for reason in EXCLUSION_STAGES),
            excluded=tuple(self.excluded),
            final=len(self.eligible),
        )


def apply_eligibility(records: Sequence[PatientRecord]) -> EligibilityResult:
    """
    Partition patients into the analysis cohort and the excluded ones.

    Returns:
        EligibilityResult with the eligible records (input order kept) and
        (id, reason) pairs for every excluded patient
    """
    eligible: List[PatientRecord] = []
    excluded: List[Tuple[str, str]] = []
    for record in records:
        reason = exclusion_reason(record)
        if reason is None:
            eligible.append(record)
        else:
            excluded.append((record.id, reason))

    logger.info("Eligibility: %d of %d patients retained", len(eligible), len(records))
    for reason in EXCLUSION_STAGES:
        count = sum(1 for _, r in excluded if r == reason)
        if count:
            logger.debug("Excluded %d patients: %s", count, reason)
    return EligibilityResult(eligible, excluded)

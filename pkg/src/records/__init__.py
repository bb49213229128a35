"""
Trial data model: patient records, CSV ingestion and cohort selection.
"""

from .base import (
    GENERIC_TOXICITIES,
    N_CYCLES,
    RULE_TOXICITIES,
    TOXICITY_NAMES,
    AgeGroup,
    DataError,
    DuplicatePatient,
    Gender,
    IncompleteTreatment,
    InvariantViolation,
    MalformedRow,
    MissingColumn,
    MissingField,
    NonPositiveDuration,
    Period,
    ToxicitySet,
    Trial,
)
from .eligibility import EXCLUSION_STAGES, ConsortSummary, EligibilityResult, apply_eligibility
from .io import Schema, read_patients, write_patients
from .patient import CycleRecord, PatientRecord, PeriodToxicity, make_toxicity

__all__ = [
    'GENERIC_TOXICITIES',
    'N_CYCLES',
    'RULE_TOXICITIES',
    'TOXICITY_NAMES',
    'AgeGroup',
    'DataError',
    'DuplicatePatient',
    'Gender',
    'IncompleteTreatment',
    'InvariantViolation',
    'MalformedRow',
    'MissingColumn',
    'MissingField',
    'NonPositiveDuration',
    'Period',
    'ToxicitySet',
    'Trial',
    'EXCLUSION_STAGES',
    'ConsortSummary',
    'EligibilityResult',
    'apply_eligibility',
    'Schema',
    'read_patients',
    'write_patients',
    'CycleRecord',
    'PatientRecord',
    'PeriodToxicity',
    'make_toxicity',
]

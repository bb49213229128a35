"""
Shared vocabulary of the trial data model: categorical enums, protocol
constants and the validation exception family raised during ingestion.
"""

from enum import Enum
from typing import Optional, Tuple


class Trial(Enum):
    """Randomized trial the patient was enrolled in"""
    BO03 = "BO03"
    BO06 = "BO06"


class AgeGroup(Enum):
    """Age category at enrolment"""
    CHILD = "child"
    ADOLESCENT = "adolescent"
    ADULT = "adult"


class Gender(Enum):
    FEMALE = "female"
    MALE = "male"


class Period(Enum):
    """Treatment period a toxicity grade was recorded in"""
    PRE = "pre"
    POST = "post"


class ToxicitySet(Enum):
    """Toxicity groupings summarized by a MOTox score"""
    RULE = "rule"
    GEN = "gen"


# Toxicities tied to a protocol dose-modification rule
RULE_TOXICITIES: Tuple[str, ...] = (
    "leucopenia",
    "thrombocytopenia",
    "oral_mucositis",
    "ototoxicity",
    "cardiotoxicity",
    "neurotoxicity",
)

# Toxicities considered by clinicians without a dedicated rule
GENERIC_TOXICITIES: Tuple[str, ...] = ("nausea_vomiting", "infection")

TOXICITY_NAMES: Tuple[str, ...] = RULE_TOXICITIES + GENERIC_TOXICITIES

TOXICITY_SETS = {
    ToxicitySet.RULE: RULE_TOXICITIES,
    ToxicitySet.GEN: GENERIC_TOXICITIES,
}

MIN_GRADE = 0
MAX_GRADE = 4

N_CYCLES = 6
ANTICIPATED_CDDP_MG_M2 = 100.0
ANTICIPATED_DOX_MG_M2 = 75.0
# 21 days x 5 cycles + 14 days surgery gap + 3 days of cycle 6
ANTICIPATED_TREATMENT_DAYS = 122
CYCLE6_TREATMENT_DAYS = 3


class DataError(Exception):
    """Base class for every input validation failure"""
    pass


class MalformedRow(DataError):
    """A row that cannot be parsed into the expected types"""

    def __init__(self, line: int, reason: str, source: Optional[str] = None):
        self.line = line
        self.reason = reason
        self.source = source
        where = f"{source}:{line}" if source else f"line {line}"
        super().__init__(f"{where}: {reason}")


class MissingColumn(DataError):
    """A required column is absent from a file header"""

    def __init__(self, name: str, source: Optional[str] = None):
        self.name = name
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"Missing column '{name}'{where}")


class InvariantViolation(DataError):
    """A parsed record breaks a data-model invariant"""

    def __init__(self, patient_id: Optional[str], detail: str):
        self.patient_id = patient_id
        self.detail = detail
        super().__init__(f"Patient {patient_id}: {detail}")


class DuplicatePatient(InvariantViolation):
    """The same patient id appears more than once"""

    def __init__(self, patient_id: str):
        super().__init__(patient_id, "duplicate patient id")


class MissingField(DataError):
    """A field needed for a derivation or a design matrix is absent"""

    def __init__(self, name: str, patient_id: Optional[str] = None):
        self.name = name
        self.patient_id = patient_id
        owner = f" for patient {patient_id}" if patient_id else ""
        super().__init__(f"Missing field '{name}'{owner}")


class IncompleteTreatment(DataError):
    """Fewer than the protocol's six cycles are available"""

    def __init__(self, n_cycles: int):
        self.n_cycles = n_cycles
        super().__init__(f"Expected {N_CYCLES} cycles, found {n_cycles}")


class NonPositiveDuration(DataError):
    """Actual treatment time is zero or negative"""

    def __init__(self, days: float):
        self.days = days
        super().__init__(f"Actual treatment time must be positive, got {days} days")

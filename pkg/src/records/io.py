"""
CSV ingestion and emission for trial data.

Two layouts are supported:

- ``long``: a directory holding ``patients.csv``, ``cycles.csv`` and
  ``toxicity.csv`` keyed by patient id
- ``wide``: a single CSV with one row per patient and one column per cycle
  field and per (period, toxicity) grade

Every file is UTF-8, comma separated, with a header row. Values are read as
text and converted field by field so that malformed input is reported with
its file and line.
"""

import logging
from collections import defaultdict
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, TypeVar, Union

import pandas as pd

from ..utils.file_utils import write_frame
from .base import (
    N_CYCLES,
    TOXICITY_NAMES,
    AgeGroup,
    DataError,
    DuplicatePatient,
    Gender,
    InvariantViolation,
    MalformedRow,
    MissingColumn,
    Period,
    Trial,
)
from .patient import CycleRecord, PatientRecord, PeriodToxicity

logger = logging.getLogger(__name__)

T = TypeVar("T")


class Schema(Enum):
    """On-disk layout of a patient dataset"""
    LONG = "long"
    WIDE = "wide"


PATIENTS_FILE = "patients.csv"
CYCLES_FILE = "cycles.csv"
TOXICITY_FILE = "toxicity.csv"

PATIENT_COLUMNS: Tuple[str, ...] = (
    "id",
    "trial",
    "age_group",
    "gender",
    "necrosis_pct",
    "efs_time_months",
    "efs_event",
    "completed_treatment",
    "had_surgery",
    "event_during_treatment",
)
CYCLE_COLUMNS: Tuple[str, ...] = ("id", "cycle_index", "dose_cddp", "dose_dox", "start_day")
TOXICITY_COLUMNS: Tuple[str, ...] = ("id", "period", "toxicity_name", "grade")

CYCLE_FIELDS: Tuple[str, ...] = ("dose_cddp", "dose_dox", "start_day")

_TRUE = {"1", "true", "yes", "t", "y"}
_FALSE = {"0", "false", "no", "f", "n"}

# Header line is line 1, first data row is line 2
_FIRST_DATA_LINE = 2


def wide_columns() -> Tuple[str, ...]:
    """Column set of the single-file wide layout, in canonical order"""
    cycle_columns = [f"cycle{j}_{name}" for j in range(1, N_CYCLES + 1) for name in CYCLE_FIELDS]
    toxicity_columns = [f"tox_{period.value}_{name}" for period in Period for name in TOXICITY_NAMES]
    return PATIENT_COLUMNS + tuple(cycle_columns) + tuple(toxicity_columns)


class _RowReader:
    """Typed field access for one CSV row with line-aware errors"""

    def __init__(self, row: Dict[str, str], line: int, source: str):
        self.row = row
        self.line = line
        self.source = source

    def fail(self, reason: str) -> MalformedRow:
        return MalformedRow(self.line, reason, self.source)

    def text(self, column: str) -> str:
        return self.row[column].strip()

    def optional_float(self, column: str) -> Optional[float]:
        value = self.text(column)
        if value == "":
            return None
        return self._convert(column, value, float, "a decimal number")

    def number(self, column: str) -> float:
        value = self.optional_float(column)
        if value is None:
            raise self.fail(f"'{column}' is empty")
        return value

    def integer(self, column: str) -> int:
        value = self.text(column)
        if value == "":
            raise self.fail(f"'{column}' is empty")
        try:
            return int(value)
        except ValueError:
            number = self._convert(column, value, float, "an integer")
            if not number.is_integer():
                raise self.fail(f"'{column}' must be an integer, got '{value}'")
            return int(number)

    def flag(self, column: str) -> bool:
        value = self.text(column).lower()
        if value in _TRUE:
            return True
        if value in _FALSE:
            return False
        raise self.fail(f"'{column}' must be a boolean, got '{self.text(column)}'")

    def enum(self, column: str, enum_cls: Callable[[str], T]) -> T:
        value = self.text(column)
        try:
            return enum_cls(value)
        except ValueError:
            raise self.fail(f"'{column}' has unexpected value '{value}'")

    def _convert(self, column: str, value: str, kind: Callable[[str], T], description: str) -> T:
        try:
            return kind(value)
        except ValueError:
            raise self.fail(f"'{column}' must be {description}, got '{value}'")


def _read_rows(path: Path, required: Sequence[str]) -> List[_RowReader]:
    """Read a CSV as text and check its header"""
    if not path.is_file():
        raise DataError(f"Input file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise MalformedRow(1, "file is empty", str(path))
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise MalformedRow(1, f"unreadable CSV: {e}", str(path))

    header = [str(column).strip() for column in frame.columns]
    frame.columns = header
    for column in required:
        if column not in header:
            raise MissingColumn(column, str(path))

    records = frame.to_dict(orient="records")
    return [_RowReader(row, _FIRST_DATA_LINE + i, str(path)) for i, row in enumerate(records)]


def _parse_patient_fields(reader: _RowReader) -> Dict[str, object]:
    return {
        "id": reader.text("id"),
        "trial": reader.enum("trial", Trial),
        "age_group": reader.enum("age_group", AgeGroup),
        "gender": reader.enum("gender", Gender),
        "hre_necrosis_pct": reader.optional_float("necrosis_pct"),
        "efs_time_months": reader.number("efs_time_months"),
        "efs_event": reader.flag("efs_event"),
        "completed_treatment": reader.flag("completed_treatment"),
        "had_surgery": reader.flag("had_surgery"),
        "event_during_treatment": reader.flag("event_during_treatment"),
    }


def _check_unique(ids: Iterable[str]) -> None:
    seen = set()
    for patient_id in ids:
        if patient_id in seen:
            raise DuplicatePatient(patient_id)
        seen.add(patient_id)


def _read_long(directory: Path) -> List[PatientRecord]:
    patient_rows = _read_rows(directory / PATIENTS_FILE, PATIENT_COLUMNS)
    patients = []
    for reader in patient_rows:
        fields = _parse_patient_fields(reader)
        if not fields["id"]:
            raise reader.fail("'id' is empty")
        patients.append(fields)
    _check_unique(fields["id"] for fields in patients)
    known = {fields["id"] for fields in patients}

    cycles: Dict[str, List[CycleRecord]] = defaultdict(list)
    for reader in _read_rows(directory / CYCLES_FILE, CYCLE_COLUMNS):
        patient_id = reader.text("id")
        if patient_id not in known:
            raise reader.fail(f"cycle row for unknown patient '{patient_id}'")
        cycles[patient_id].append(
            CycleRecord(
                index=reader.integer("cycle_index"),
                dose_cddp_mg_m2=reader.number("dose_cddp"),
                dose_dox_mg_m2=reader.number("dose_dox"),
                start_day=reader.integer("start_day"),
            )
        )

    grades: Dict[str, Dict[Period, Dict[str, int]]] = defaultdict(lambda: {p: {} for p in Period})
    for reader in _read_rows(directory / TOXICITY_FILE, TOXICITY_COLUMNS):
        patient_id = reader.text("id")
        if patient_id not in known:
            raise reader.fail(f"toxicity row for unknown patient '{patient_id}'")
        period = reader.enum("period", Period)
        name = reader.text("toxicity_name")
        if name in grades[patient_id][period]:
            raise InvariantViolation(patient_id, f"duplicate {period.value}-period grade for '{name}'")
        grades[patient_id][period][name] = reader.integer("grade")

    records = []
    for fields in patients:
        patient_id = fields["id"]
        patient_cycles = sorted(cycles.get(patient_id, []), key=lambda cycle: cycle.index)
        indices = [cycle.index for cycle in patient_cycles]
        if len(set(indices)) != len(indices):
            raise InvariantViolation(patient_id, "duplicate cycle index")
        period_grades = grades.get(patient_id, {p: {} for p in Period})
        toxicity = {period: PeriodToxicity(period, period_grades[period]) for period in Period}
        records.append(PatientRecord(cycles=tuple(patient_cycles), toxicity=toxicity, **fields))

    logger.info("Read %d patients from %s", len(records), directory)
    return records


def _read_wide(path: Path) -> List[PatientRecord]:
    records = []
    for reader in _read_rows(path, wide_columns()):
        fields = _parse_patient_fields(reader)
        if not fields["id"]:
            raise reader.fail("'id' is empty")

        patient_cycles = []
        for j in range(1, N_CYCLES + 1):
            columns = [f"cycle{j}_{name}" for name in CYCLE_FIELDS]
            filled = [reader.text(column) != "" for column in columns]
            if not any(filled):
                continue
            if not all(filled):
                raise reader.fail(f"cycle {j} is only partially recorded")
            patient_cycles.append(
                CycleRecord(
                    index=j,
                    dose_cddp_mg_m2=reader.number(columns[0]),
                    dose_dox_mg_m2=reader.number(columns[1]),
                    start_day=reader.integer(columns[2]),
                )
            )

        toxicity = {}
        for period in Period:
            period_grades = {}
            for name in TOXICITY_NAMES:
                column = f"tox_{period.value}_{name}"
                if reader.text(column) == "":
                    raise InvariantViolation(fields["id"], f"{period.value}-period grade for '{name}' is missing")
                period_grades[name] = reader.integer(column)
            toxicity[period] = PeriodToxicity(period, period_grades)

        records.append(PatientRecord(cycles=tuple(patient_cycles), toxicity=toxicity, **fields))

    _check_unique(record.id for record in records)
    logger.info("Read %d patients from %s", len(records), path)
    return records


def read_patients(path: Union[str, Path], schema: Union[str, Schema] = Schema.LONG) -> List[PatientRecord]:
    """
    Read and validate a patient dataset.

    Args:
        path: directory of the long layout, or the CSV file of the wide layout
        schema: ``long`` or ``wide``

    Raises:
        MalformedRow: a field cannot be parsed
        MissingColumn: a header lacks a documented column
        InvariantViolation: a record breaks a data-model invariant
            (including duplicated patient ids)
    """
    schema = Schema(schema)
    path = Path(path)
    if schema is Schema.LONG:
        return _read_long(path)
    return _read_wide(path)


def _format_float(value: Optional[float]) -> str:
    # repr gives the shortest string that reads back to the same double
    return "" if value is None else repr(float(value))


def _format_bool(value: bool) -> str:
    return "1" if value else "0"


def _patient_row(record: PatientRecord) -> Dict[str, str]:
    return {
        "id": record.id,
        "trial": record.trial.value,
        "age_group": record.age_group.value,
        "gender": record.gender.value,
        "necrosis_pct": _format_float(record.hre_necrosis_pct),
        "efs_time_months": _format_float(record.efs_time_months),
        "efs_event": _format_bool(record.efs_event),
        "completed_treatment": _format_bool(record.completed_treatment),
        "had_surgery": _format_bool(record.had_surgery),
        "event_during_treatment": _format_bool(record.event_during_treatment),
    }


def write_patients(
    records: Sequence[PatientRecord],
    path: Union[str, Path],
    schema: Union[str, Schema] = Schema.LONG,
) -> None:
    """Write records in the requested layout; read_patients reverses it"""
    schema = Schema(schema)
    path = Path(path)

    if schema is Schema.LONG:
        path.mkdir(parents=True, exist_ok=True)
        patients = [_patient_row(record) for record in records]
        cycles = [
            {
                "id": record.id,
                "cycle_index": str(cycle.index),
                "dose_cddp": _format_float(cycle.dose_cddp_mg_m2),
                "dose_dox": _format_float(cycle.dose_dox_mg_m2),
                "start_day": str(cycle.start_day),
            }
            for record in records
            for cycle in record.cycles
        ]
        toxicity = [
            {
                "id": record.id,
                "period": period.value,
                "toxicity_name": name,
                "grade": str(record.toxicity[period].grades[name]),
            }
            for record in records
            for period in Period
            for name in TOXICITY_NAMES
        ]
        write_frame(path / PATIENTS_FILE, pd.DataFrame(patients, columns=list(PATIENT_COLUMNS)))
        write_frame(path / CYCLES_FILE, pd.DataFrame(cycles, columns=list(CYCLE_COLUMNS)))
        write_frame(path / TOXICITY_FILE, pd.DataFrame(toxicity, columns=list(TOXICITY_COLUMNS)))
        logger.info("Wrote %d patients to %s", len(records), path)
        return

    rows = []
    for record in records:
        row = _patient_row(record)
        by_index = {cycle.index: cycle for cycle in record.cycles}
        for j in range(1, N_CYCLES + 1):
            cycle = by_index.get(j)
            row[f"cycle{j}_dose_cddp"] = _format_float(cycle.dose_cddp_mg_m2) if cycle else ""
            row[f"cycle{j}_dose_dox"] = _format_float(cycle.dose_dox_mg_m2) if cycle else ""
            row[f"cycle{j}_start_day"] = str(cycle.start_day) if cycle else ""
        for period in Period:
            for name in TOXICITY_NAMES:
                row[f"tox_{period.value}_{name}"] = str(record.toxicity[period].grades[name])
        rows.append(row)
    write_frame(path, pd.DataFrame(rows, columns=list(wide_columns())))
    logger.info("Wrote %d patients to %s", len(records), path)

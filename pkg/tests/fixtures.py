"""Record and dataset builders shared by the test modules"""

import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.covariates import build_analysis_frame
from src.records.base import TOXICITY_NAMES, AgeGroup, Gender, Trial
from src.records.patient import CycleRecord, PatientRecord, make_toxicity
from src.simulation import preset, simulate

# 21-day cycles with the 14-day surgery gap after cycle 3 (BO03 schedule)
PROTOCOL_STARTS = (0, 21, 42, 77, 98, 119)


def grades(**overrides: int) -> Dict[str, int]:
    values = {name: 0 for name in TOXICITY_NAMES}
    values.update(overrides)
    return values


def make_cycles(
    cddp: float = 100.0,
    dox: float = 75.0,
    starts: Sequence[float] = PROTOCOL_STARTS,
    n: int = 6,
):
    return tuple(CycleRecord(j + 1, cddp, dox, starts[j]) for j in range(n))


def make_record(
    patient_id: str = "P1",
    necrosis: Optional[float] = 0.95,
    cycles=None,
    pre: Optional[Dict[str, int]] = None,
    post: Optional[Dict[str, int]] = None,
    time: float = 24.0,
    event: bool = False,
    trial: Trial = Trial.BO03,
    age_group: AgeGroup = AgeGroup.CHILD,
    gender: Gender = Gender.FEMALE,
    **flags,
) -> PatientRecord:
    return PatientRecord(
        id=patient_id,
        trial=trial,
        age_group=age_group,
        gender=gender,
        cycles=make_cycles() if cycles is None else cycles,
        toxicity=make_toxicity(pre or grades(), post or grades()),
        hre_necrosis_pct=necrosis,
        efs_time_months=time,
        efs_event=event,
        **flags,
    )


def simulated_frame(n: int = 600, seed: int = 1, name: str = "default", **overrides):
    """Analysis frame of a simulated dataset, with the simulation result"""
    result = simulate(preset(name, n=n, seed=seed, **overrides))
    return build_analysis_frame(result.records, result.covariates), result

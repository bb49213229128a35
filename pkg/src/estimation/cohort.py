"""
Descriptive tables of the analysis cohort by exposure group, with the
usual accompanying tests: Pearson chi-squared for categorical rows, the
log-rank test of event-free survival and the reverse Kaplan-Meier median
follow-up. Every table and test is given for the pooled cohort and
again within each trial.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple

import numpy as np
import pandas as pd
from scipy.stats import chi2_contingency

from ..covariates import EXPOSURE_LEVELS
from .base import DegenerateGroups, DegenerateInput, MedianUndefined
from .iptw import EFFECT_MODIFIER, EXPOSURE
from .survival import logrank_test, reverse_kaplan_meier_median

logger = logging.getLogger(__name__)

CATEGORICAL_ROWS: Tuple[str, ...] = ("trial", "age_group", "gender", EFFECT_MODIFIER)
CONTINUOUS_ROWS: Tuple[str, ...] = (
    "rdi",
    "delta",
    "gamma",
    "motox_rule_pre",
    "motox_rule_post",
    "motox_gen_pre",
    "motox_gen_post",
)
POOLED = "all"
DESCRIBE_COLUMNS = (
    ["trial", "variable", "level", "statistic"] + [f"exposure_{a}" for a in EXPOSURE_LEVELS] + ["overall"]
)


@dataclass(frozen=True)
class ChiSquaredResult:
    statistic: float
    df: int
    p_value: float

    def to_dict(self) -> Dict[str, Any]:
        return {"statistic": self.statistic, "df": self.df, "p_value": self.p_value}


def chi_squared_independence(a, b) -> ChiSquaredResult:
    """
    Pearson chi-squared test of independence without continuity correction.

    Raises:
        DegenerateInput: either variable takes a single value
    """
    table = pd.crosstab(pd.Series(np.asarray(a), name="a"), pd.Series(np.asarray(b), name="b"))
    if table.shape[0] < 2 or table.shape[1] < 2:
        raise DegenerateInput(f"Contingency table of shape {table.shape} has no degrees of freedom")
    statistic, p_value, df, _ = chi2_contingency(table.to_numpy(), correction=False)
    return ChiSquaredResult(float(statistic), int(df), float(p_value))


def _continuous_summary(values: pd.Series) -> Dict[str, float]:
    q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75]) if len(values) else (np.nan,) * 3
    return {
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(values.min()) if len(values) else np.nan,
        "max": float(values.max()) if len(values) else np.nan,
    }


def _describe(frame: pd.DataFrame) -> Tuple[list, Dict[str, Any]]:
    groups = {a: frame[frame[EXPOSURE] == a] for a in EXPOSURE_LEVELS}
    rows = []

    rows.append({"variable": "n", "level": "", "statistic": "count",
                 **{f"exposure_{a}": float(len(g)) for a, g in groups.items()}, "overall": float(len(frame))})

    tests: Dict[str, Any] = {"chi_squared": {}}
    for variable in CATEGORICAL_ROWS:
        if variable not in frame.columns:
            continue
        for level in sorted(frame[variable].unique(), key=str):
            for statistic in ("count", "percent"):
                row = {"variable": variable, "level": str(level), "statistic": statistic}
                for a, g in list(groups.items()) + [("overall", frame)]:
                    count = float((g[variable] == level).sum())
                    value = count if statistic == "count" else (100.0 * count / len(g) if len(g) else np.nan)
                    row["overall" if a == "overall" else f"exposure_{a}"] = value
                rows.append(row)
        try:
            tests["chi_squared"][variable] = chi_squared_independence(frame[EXPOSURE], frame[variable]).to_dict()
        except DegenerateInput as e:
            tests["chi_squared"][variable] = {"error": str(e)}

    for variable in CONTINUOUS_ROWS:
        if variable not in frame.columns:
            continue
        summaries = {a: _continuous_summary(g[variable]) for a, g in groups.items()}
        summaries["overall"] = _continuous_summary(frame[variable])
        for statistic in ("median", "q1", "q3", "min", "max"):
            row = {"variable": variable, "level": "", "statistic": statistic}
            for a, summary in summaries.items():
                row["overall" if a == "overall" else f"exposure_{a}"] = summary[statistic]
            rows.append(row)

    times = frame["efs_time_months"].to_numpy(dtype=float)
    events = frame["efs_event"].to_numpy(dtype=int)
    try:
        tests["logrank"] = logrank_test(times, events, frame[EXPOSURE].to_numpy()).to_dict()
    except DegenerateGroups as e:
        tests["logrank"] = {"error": str(e)}
    try:
        tests["median_followup_months"] = reverse_kaplan_meier_median(times, events)
    except MedianUndefined as e:
        tests["median_followup_months"] = None
        logger.warning("Median follow-up undefined: %s", e)
    return rows, tests


def describe_cohort(frame: pd.DataFrame) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """
    Per-exposure description of the analysis frame, pooled and per trial.

    Returns:
        (table, tests): a long table with counts/percentages of categorical
        levels and median/IQR/range of continuous variables, its ``trial``
        column being ``all`` for the pooled cohort or the trial name; and a
        dict of chi-squared tests, the log-rank test and median follow-up of
        the pooled cohort, repeated per trial under ``by_trial``
    """
    rows, tests = _describe(frame)
    table = [dict(row, trial=POOLED) for row in rows]
    tests["by_trial"] = {}
    for trial in sorted(frame["trial"].unique(), key=str):
        trial_rows, trial_tests = _describe(frame[frame["trial"] == trial])
        table.extend(dict(row, trial=str(trial)) for row in trial_rows)
        tests["by_trial"][str(trial)] = trial_tests
    return pd.DataFrame(table, columns=DESCRIBE_COLUMNS), tests

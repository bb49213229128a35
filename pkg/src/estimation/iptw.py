"""
Stabilized inverse-probability-of-treatment weights.

The numerator model conditions on the effect modifier only; the denominator
model adds the baseline confounders and the four MOTox scores under one of
five specifications:

- IPTW1: main effects only, MOTox linear in the log-odds
- IPTW2: IPTW1 plus the gen x rule MOTox products within each period
- IPTW3: IPTW1 plus trial x MOTox products
- IPTW4: IPTW1 with every MOTox score replaced by a cubic B-spline basis
- IPTW5: IPTW1 plus response x MOTox products

Diagnostics follow the usual screens for positivity and misspecification:
weight mean near one, no extreme weights, no empty exposure by category
cells, and covariate balance measured by standardized mean differences.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..covariates import EXPOSURE_LEVELS
from ..records.base import AgeGroup, Gender, MissingField, Trial
from .base import DegenerateInput, DesignMatrix, NumericalError, ZeroDenominator, ZeroVariance
from .glm import MultinomialFit, fit_multinomial, predict_proba
from .splines import KnotRule, bspline_basis

logger = logging.getLogger(__name__)

EXPOSURE = "exposure"
EFFECT_MODIFIER = "effect_modifier"
MIN_PROBABILITY = 1e-12

# Main effects in the order of the printed linear predictors
MAIN_EFFECTS: Tuple[str, ...] = (
    "BO06",
    "adolescent",
    "adult",
    "male",
    "motox_gen_pre",
    "motox_rule_pre",
    "motox_gen_post",
    "motox_rule_post",
    "GR",
)
MOTOX_FEATURES: Tuple[str, ...] = MAIN_EFFECTS[4:8]
# Confounders whose balance is reported
BALANCE_CONFOUNDERS: Tuple[str, ...] = MAIN_EFFECTS[:8]
# Categorical variables screened for empty exposure cells
CATEGORICAL_LEVELS: Dict[str, Tuple[Any, ...]] = {
    "trial": tuple(t.value for t in Trial),
    "age_group": tuple(a.value for a in AgeGroup),
    "gender": tuple(g.value for g in Gender),
    EFFECT_MODIFIER: (0, 1),
}
SMD_FORMULA = "mean of |pairwise weighted mean difference| / sqrt((var_a + var_b) / 2), unweighted var"


def confounder_features(frame: pd.DataFrame) -> pd.DataFrame:
    """Dummy-encoded baseline variables, MOTox scores and the response indicator"""
    required = ("trial", "age_group", "gender", EFFECT_MODIFIER) + MOTOX_FEATURES
    for column in required:
        if column not in frame.columns:
            raise MissingField(column)
        if frame[column].isna().any():
            missing = frame.loc[frame[column].isna()]
            owner = str(missing["id"].iloc[0]) if "id" in frame.columns else None
            raise MissingField(column, owner)

    features = pd.DataFrame(index=frame.index)
    features["BO06"] = (frame["trial"] == Trial.BO06.value).astype(float)
    features["adolescent"] = (frame["age_group"] == AgeGroup.ADOLESCENT.value).astype(float)
    features["adult"] = (frame["age_group"] == AgeGroup.ADULT.value).astype(float)
    features["male"] = (frame["gender"] == Gender.MALE.value).astype(float)
    for column in MOTOX_FEATURES:
        features[column] = frame[column].astype(float)
    features["GR"] = frame[EFFECT_MODIFIER].astype(float)
    return features


@dataclass(frozen=True)
class Main:
    feature: str

    def columns(self, features: pd.DataFrame, knot_rule: KnotRule) -> List[Tuple[str, np.ndarray]]:
        return [(self.feature, features[self.feature].to_numpy())]


@dataclass(frozen=True)
class Interaction:
    left: str
    right: str

    def columns(self, features: pd.DataFrame, knot_rule: KnotRule) -> List[Tuple[str, np.ndarray]]:
        product = features[self.left].to_numpy() * features[self.right].to_numpy()
        return [(f"{self.left}:{self.right}", product)]


@dataclass(frozen=True)
class Spline:
    feature: str
    degree: int = 3
    n_interior_knots: int = 3

    def columns(self, features: pd.DataFrame, knot_rule: KnotRule) -> List[Tuple[str, np.ndarray]]:
        basis = bspline_basis(features[self.feature].to_numpy(), self.degree, self.n_interior_knots, knot_rule)
        return list(zip(basis.column_names(self.feature), basis.values.T))


Term = Union[Main, Interaction, Spline]


class SpecId(Enum):
    IPTW1 = "IPTW1"
    IPTW2 = "IPTW2"
    IPTW3 = "IPTW3"
    IPTW4 = "IPTW4"
    IPTW5 = "IPTW5"

    @classmethod
    def parse(cls, value: Union[str, "SpecId"]) -> "SpecId":
        if isinstance(value, SpecId):
            return value
        return cls(str(value).upper())


@dataclass(frozen=True)
class WeightSpec:
    """Declarative denominator design; the intercept is implicit"""

    id: SpecId
    terms: Tuple[Term, ...]
    description: str = ""


def _main_terms() -> Tuple[Term, ...]:
    return tuple(Main(name) for name in MAIN_EFFECTS)


WEIGHT_SPECS: Dict[SpecId, WeightSpec] = {
    SpecId.IPTW1: WeightSpec(SpecId.IPTW1, _main_terms(), "main effects, MOTox linear"),
    SpecId.IPTW2: WeightSpec(
        SpecId.IPTW2,
        _main_terms()
        + (Interaction("motox_gen_pre", "motox_rule_pre"), Interaction("motox_gen_post", "motox_rule_post")),
        "IPTW1 + gen x rule MOTox interactions",
    ),
    SpecId.IPTW3: WeightSpec(
        SpecId.IPTW3,
        _main_terms() + tuple(Interaction("BO06", name) for name in MOTOX_FEATURES),
        "IPTW1 + trial x MOTox interactions",
    ),
    SpecId.IPTW4: WeightSpec(
        SpecId.IPTW4,
        tuple(Spline(name) if name in MOTOX_FEATURES else Main(name) for name in MAIN_EFFECTS),
        "main effects, cubic B-spline MOTox (3 interior knots)",
    ),
    SpecId.IPTW5: WeightSpec(
        SpecId.IPTW5,
        _main_terms() + tuple(Interaction("GR", name) for name in MOTOX_FEATURES),
        "IPTW1 + response x MOTox interactions",
    ),
}

NUMERATOR_TERMS: Tuple[Term, ...] = (Main("GR"),)


def get_spec(spec: Union[str, SpecId, WeightSpec]) -> WeightSpec:
    if isinstance(spec, WeightSpec):
        return spec
    return WEIGHT_SPECS[SpecId.parse(spec)]


def _design_from_terms(terms: Sequence[Term], frame: pd.DataFrame, knot_rule: KnotRule) -> DesignMatrix:
    features = confounder_features(frame)
    named = [column for term in terms for column in term.columns(features, knot_rule)]
    return DesignMatrix.from_columns(named, len(frame))


def build_design(
    spec: Union[str, SpecId, WeightSpec],
    frame: pd.DataFrame,
    knot_rule: KnotRule = KnotRule.QUANTILE,
) -> DesignMatrix:
    """
    Denominator design for one specification.

    Raises:
        MissingField: a required analysis column is absent or empty
        DegenerateInput: a spline basis cannot be placed
    """
    return _design_from_terms(get_spec(spec).terms, frame, knot_rule)


def numerator_design(frame: pd.DataFrame) -> DesignMatrix:
    return _design_from_terms(NUMERATOR_TERMS, frame, KnotRule.QUANTILE)


@dataclass(frozen=True)
class WeightSummary:
    mean: float
    sd: float
    min: float
    max: float

    @classmethod
    def of(cls, weights: np.ndarray) -> "WeightSummary":
        weights = np.asarray(weights, dtype=float)
        sd = float(np.std(weights, ddof=1)) if weights.size > 1 else 0.0
        return cls(float(np.mean(weights)), sd, float(np.min(weights)), float(np.max(weights)))

    def to_dict(self) -> Dict[str, float]:
        return {"mean": self.mean, "sd": self.sd, "min": self.min, "max": self.max}


@dataclass(frozen=True)
class StabilizedWeights:
    """Per-subject stabilized weights with the fits that produced them"""

    spec: str
    ids: Tuple[str, ...]
    weights: np.ndarray
    numerator_probability: np.ndarray
    denominator_probability: np.ndarray
    numerator_fit: MultinomialFit
    denominator_fit: MultinomialFit
    truncated_at: Optional[Tuple[float, float]] = None

    @property
    def summary(self) -> WeightSummary:
        return WeightSummary.of(self.weights)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"id": list(self.ids), "spec": self.spec, "sw": self.weights})


def truncate_weights(weights: np.ndarray, percentile: float) -> Tuple[np.ndarray, Tuple[float, float]]:
    """Clip weights to the [100 - p, p] percentile range"""
    if not 50.0 < percentile <= 100.0:
        raise ValueError(f"Truncation percentile must lie in (50, 100], got {percentile}")
    lower, upper = np.percentile(weights, [100.0 - percentile, percentile])
    return np.clip(weights, lower, upper), (float(lower), float(upper))


def weights_from_designs(
    exposure: np.ndarray,
    numerator: DesignMatrix,
    denominator: DesignMatrix,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, MultinomialFit, MultinomialFit]:
    """
    Ratio of numerator to denominator probability of the observed exposure.

    Returns:
        (weights, numerator probabilities, denominator probabilities,
        numerator fit, denominator fit)
    """
    exposure = np.asarray(exposure, dtype=int)
    rows = np.arange(len(exposure))
    num_fit = fit_multinomial(exposure, numerator, tol=tol, max_iter=max_iter)
    den_fit = fit_multinomial(exposure, denominator, tol=tol, max_iter=max_iter)
    p_num = predict_proba(num_fit, numerator)[rows, exposure]
    p_den = predict_proba(den_fit, denominator)[rows, exposure]
    if np.any(p_den < MIN_PROBABILITY):
        worst = int(np.argmin(p_den))
        raise ZeroDenominator(f"Denominator probability {p_den[worst]:.3g} for row {worst}")
    return p_num / p_den, p_num, p_den, num_fit, den_fit


def stabilized_weights(
    spec: Union[str, SpecId, WeightSpec],
    frame: pd.DataFrame,
    tol: float = 1e-8,
    max_iter: int = 100,
    knot_rule: KnotRule = KnotRule.QUANTILE,
    truncate_percentile: Optional[float] = None,
) -> StabilizedWeights:
    """
    Stabilized weights P(A | V) / P(A | L, V) for every row of the analysis frame.

    Raises:
        MissingField, DegenerateInput, RankDeficient, Separation,
        NotConverged, ZeroDenominator
    """
    spec = get_spec(spec)
    if EXPOSURE not in frame.columns:
        raise MissingField(EXPOSURE)
    exposure = frame[EXPOSURE].to_numpy(dtype=int)

    weights, p_num, p_den, num_fit, den_fit = weights_from_designs(
        exposure,
        numerator_design(frame),
        build_design(spec, frame, knot_rule),
        tol=tol,
        max_iter=max_iter,
    )
    bounds = None
    if truncate_percentile is not None:
        weights, bounds = truncate_weights(weights, truncate_percentile)

    ids = tuple(str(i) for i in frame["id"]) if "id" in frame.columns else tuple(str(i) for i in range(len(frame)))
    result = StabilizedWeights(
        spec=spec.id.value,
        ids=ids,
        weights=weights,
        numerator_probability=p_num,
        denominator_probability=p_den,
        numerator_fit=num_fit,
        denominator_fit=den_fit,
        truncated_at=bounds,
    )
    s = result.summary
    logger.info("%s weights: mean %.3f (sd %.3f), min %.3f, max %.3f", spec.id.value, s.mean, s.sd, s.min, s.max)
    return result


@dataclass(frozen=True)
class WeightDiagnostics:
    """Positivity and misspecification screen of one weight vector"""

    spec: str
    summary: WeightSummary
    mean_tolerance: float
    max_weight: float
    mean_flag: bool
    max_flag: bool
    empty_cells: Mapping[str, int] = field(default_factory=dict)

    @property
    def flags(self) -> List[str]:
        flags = []
        if self.mean_flag:
            flags.append(f"mean weight {self.summary.mean:.3f} deviates from 1 by more than {self.mean_tolerance}")
        if self.max_flag:
            flags.append(f"max weight {self.summary.max:.3f} exceeds {self.max_weight}")
        for name, count in sorted(self.empty_cells.items()):
            if count:
                flags.append(f"{count} empty exposure x {name} cells")
        return flags

    def to_dict(self) -> Dict[str, Any]:
        return {
            "spec": self.spec,
            "summary": self.summary.to_dict(),
            "mean_tolerance": self.mean_tolerance,
            "max_weight": self.max_weight,
            "mean_flag": self.mean_flag,
            "max_flag": self.max_flag,
            "empty_cells": dict(self.empty_cells),
            "flags": self.flags,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "WeightDiagnostics":
        summary = payload["summary"]
        return cls(
            spec=payload["spec"],
            summary=WeightSummary(summary["mean"], summary["sd"], summary["min"], summary["max"]),
            mean_tolerance=float(payload["mean_tolerance"]),
            max_weight=float(payload["max_weight"]),
            mean_flag=bool(payload["mean_flag"]),
            max_flag=bool(payload["max_flag"]),
            empty_cells={k: int(v) for k, v in payload.get("empty_cells", {}).items()},
        )


def empty_exposure_cells(frame: pd.DataFrame) -> Dict[str, int]:
    """Number of exposure x category combinations without any subject"""
    result = {}
    for column, levels in CATEGORICAL_LEVELS.items():
        if column not in frame.columns:
            continue
        observed = set(zip(frame[EXPOSURE].astype(int), frame[column]))
        result[column] = sum(1 for a in EXPOSURE_LEVELS for level in levels if (a, level) not in observed)
    return result


def weight_diagnostics(
    weights: Union[StabilizedWeights, np.ndarray],
    frame: Optional[pd.DataFrame] = None,
    mean_tolerance: float = 0.05,
    max_weight: float = 10.0,
) -> WeightDiagnostics:
    """Flag mean far from one, extreme weights and (with a frame) empty cells"""
    if isinstance(weights, StabilizedWeights):
        spec, values = weights.spec, weights.weights
    else:
        spec, values = "custom", np.asarray(weights, dtype=float)
    summary = WeightSummary.of(values)
    diagnostics = WeightDiagnostics(
        spec=spec,
        summary=summary,
        mean_tolerance=mean_tolerance,
        max_weight=max_weight,
        mean_flag=abs(summary.mean - 1.0) > mean_tolerance,
        max_flag=summary.max > max_weight,
        empty_cells=empty_exposure_cells(frame) if frame is not None else {},
    )
    for flag in diagnostics.flags:
        logger.warning("%s: %s", spec, flag)
    return diagnostics


def balance_table(
    frame: pd.DataFrame,
    weights: Optional[Union[StabilizedWeights, np.ndarray]] = None,
    confounders: Sequence[str] = BALANCE_CONFOUNDERS,
) -> pd.Series:
    """
    Mean absolute pairwise standardized difference per confounder.

    Group means are weighted when weights are given; the pooled standard
    deviation is always unweighted so adjusted and unadjusted values share
    a denominator.

    Raises:
        ZeroVariance: a pooled standard deviation is zero
        DegenerateInput: an exposure group has fewer than two subjects
    """
    features = confounder_features(frame)
    exposure = frame[EXPOSURE].to_numpy(dtype=int)
    if weights is None:
        w = np.ones(len(frame))
    elif isinstance(weights, StabilizedWeights):
        w = weights.weights
    else:
        w = np.asarray(weights, dtype=float)

    groups = {a: exposure == a for a in EXPOSURE_LEVELS}
    for a, mask in groups.items():
        if mask.sum() < 2:
            raise DegenerateInput(f"Exposure group {a} has fewer than two subjects")

    values = {}
    for confounder in confounders:
        x = features[confounder].to_numpy()
        means = {a: np.average(x[mask], weights=w[mask]) for a, mask in groups.items()}
        variances = {a: np.var(x[mask], ddof=1) for a, mask in groups.items()}
        pairwise = []
        for a, b in combinations(EXPOSURE_LEVELS, 2):
            pooled = np.sqrt((variances[a] + variances[b]) / 2.0)
            if pooled == 0.0:
                raise ZeroVariance(confounder)
            pairwise.append(abs(means[a] - means[b]) / pooled)
        values[confounder] = float(np.mean(pairwise))
    return pd.Series(values, name="unweighted" if weights is None else "weighted")


@dataclass
class SpecComparison:
    """Weights of every attempted specification, with per-spec failures"""

    results: Dict[str, StabilizedWeights] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)

    def table(self) -> pd.DataFrame:
        rows = []
        for spec in SpecId:
            name = spec.value
            if name in self.results:
                s = self.results[name].summary
                rows.append({"spec": name, "status": "ok", "mean": s.mean, "sd": s.sd, "min": s.min, "max": s.max})
            elif name in self.failures:
                rows.append({"spec": name, "status": f"failed: {self.failures[name]}",
                             "mean": np.nan, "sd": np.nan, "min": np.nan, "max": np.nan})
        return pd.DataFrame(rows, columns=["spec", "status", "mean", "sd", "min", "max"])


def compare_specs(
    frame: pd.DataFrame,
    specs: Sequence[Union[str, SpecId]] = tuple(SpecId),
    workers: int = 1,
    **options: Any,
) -> SpecComparison:
    """Fit several specifications; a failing spec is recorded, not raised"""
    names = [SpecId.parse(spec).value for spec in specs]

    def attempt(name: str):
        try:
            return name, stabilized_weights(name, frame, **options), None
        except (NumericalError, MissingField) as e:
            return name, None, f"{type(e).__name__}: {e}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = list(executor.map(attempt, names))
    else:
        outcomes = [attempt(name) for name in names]

    comparison = SpecComparison()
    for name, result, error in outcomes:
        if error is None:
            comparison.results[name] = result
        else:
            logger.warning("Weight specification %s failed: %s", name, error)
            comparison.failures[name] = error
    return comparison

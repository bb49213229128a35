"""
Synthetic trial datasets with toxicity-driven dose reductions.

Causal structure of one simulated patient:

- baseline confounders: trial, age group, gender
- a counterfactual rank U ~ Uniform(0, 1) fixes every counterfactual event
  time, T^a = -log(U) / (rate * exp(lp(a, V)))
- a latent toxicity susceptibility correlated with U drives the CTCAE
  grades of both periods, so toxicity predicts both the outcome and the
  dose intensity actually received
- exposure (RDI category) is drawn from a multinomial logit on the
  confounders and the four MOTox scores
- histological response V is drawn independently of everything else

Because U is uniform whatever the toxicity, the marginal structural Cox
model holds exactly with the configured coefficients, while a Cox model on
the observed data is confounded by toxicity.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from scipy.integrate import quad
from scipy.special import softmax
from scipy.stats import norm

from .covariates import MOTOX_KEYS, DerivedCovariates, standardized_dose, standardized_time
from .estimation.base import PositivityFloorViolated
from .estimation.survival import COX_TERMS, pattern_row
from .records.base import (
    ANTICIPATED_CDDP_MG_M2,
    ANTICIPATED_DOX_MG_M2,
    ANTICIPATED_TREATMENT_DAYS,
    CYCLE6_TREATMENT_DAYS,
    GENERIC_TOXICITIES,
    N_CYCLES,
    RULE_TOXICITIES,
    TOXICITY_NAMES,
    AgeGroup,
    Gender,
    Period,
    ToxicitySet,
    Trial,
)
from .records.patient import CycleRecord, PatientRecord, make_toxicity

logger = logging.getLogger(__name__)

EXPOSURE_FEATURES: Tuple[str, ...] = (
    "intercept",
    "BO06",
    "adolescent",
    "adult",
    "male",
    "motox_gen_pre",
    "motox_rule_pre",
    "motox_gen_post",
    "motox_rule_post",
)

# Ordered-probit cutpoints per toxicity: latent value above the k-th
# cutpoint means grade >= k
DEFAULT_CUTPOINTS: Dict[str, Tuple[float, float, float, float]] = {
    "leucopenia": (-1.2, -0.5, 0.3, 1.2),
    "thrombocytopenia": (-0.6, 0.0, 0.7, 1.5),
    "oral_mucositis": (-0.3, 0.4, 1.0, 1.8),
    "ototoxicity": (0.2, 0.9, 1.6, 2.4),
    "cardiotoxicity": (0.8, 1.5, 2.2, 2.8),
    "neurotoxicity": (0.5, 1.2, 2.0, 2.6),
    "nausea_vomiting": (-1.5, -0.8, -0.1, 1.0),
    "infection": (-0.2, 0.5, 1.2, 2.0),
}


def _exposure_coefficients(intercept, bo06, adolescent, adult, male, gen, rule) -> Dict[str, float]:
    return {
        "intercept": intercept,
        "BO06": bo06,
        "adolescent": adolescent,
        "adult": adult,
        "male": male,
        "motox_gen_pre": gen,
        "motox_rule_pre": rule,
        "motox_gen_post": gen,
        "motox_rule_post": rule,
    }


DEFAULT_EXPOSURE_COEFFICIENTS: Dict[int, Dict[str, float]] = {
    1: _exposure_coefficients(-1.9, 0.3, 0.2, 0.4, -0.1, 0.05, 0.15),
    2: _exposure_coefficients(-3.4, 0.4, 0.3, 0.6, -0.1, 0.08, 0.30),
}

# Surgery follows cycle 3 in BO03 and cycle 2 in BO06; both add 14 days
CYCLE_GAPS: Dict[Trial, Tuple[int, ...]] = {
    Trial.BO03: (21, 21, 35, 21, 21),
    Trial.BO06: (21, 35, 21, 21, 21),
}
ANTICIPATED_CYCLE6_START = ANTICIPATED_TREATMENT_DAYS - CYCLE6_TREATMENT_DAYS


@dataclass(frozen=True)
class SimConfig:
    """Parameters of the data-generating process"""

    n: int = 500
    seed: int = 0
    p_bo06: float = 0.55
    age_probs: Tuple[float, float, float] = (0.35, 0.50, 0.15)
    p_male: float = 0.6
    hre_prevalence: float = 0.35
    toxicity_loading: float = 0.6
    toxicity_hazard_link: float = 0.5
    toxicity_cutpoints: Mapping[str, Tuple[float, ...]] = field(default_factory=lambda: dict(DEFAULT_CUTPOINTS))
    post_shift: float = 0.2
    exposure_coefficients: Mapping[int, Mapping[str, float]] = field(
        default_factory=lambda: {a: dict(c) for a, c in DEFAULT_EXPOSURE_COEFFICIENTS.items()}
    )
    positivity_floor: float = 0.02
    beta: Tuple[float, float, float, float, float] = (0.15, 0.40, -0.20, -0.30, -0.70)
    baseline_hazard: float = 0.012
    censoring_rate: float = 0.006
    rdi_bounds: Tuple[float, float, float, float] = (0.35, 0.70, 0.85, 1.0)
    rdi_margin: float = 1e-3
    max_delay: float = 0.35
    missing_hre_fraction: float = 0.0
    incomplete_treatment_fraction: float = 0.0
    event_during_treatment_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "age_probs", tuple(float(p) for p in self.age_probs))
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        object.__setattr__(self, "rdi_bounds", tuple(float(b) for b in self.rdi_bounds))
        object.__setattr__(
            self, "toxicity_cutpoints", {k: tuple(float(c) for c in v) for k, v in self.toxicity_cutpoints.items()}
        )
        object.__setattr__(
            self,
            "exposure_coefficients",
            {int(a): {k: float(c) for k, c in coefs.items()} for a, coefs in self.exposure_coefficients.items()},
        )
        self.validate()

    def validate(self) -> None:
        """Raise ValueError on any inconsistent parameter"""
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        probabilities = {
            "p_bo06": self.p_bo06,
            "p_male": self.p_male,
            "hre_prevalence": self.hre_prevalence,
            "missing_hre_fraction": self.missing_hre_fraction,
            "incomplete_treatment_fraction": self.incomplete_treatment_fraction,
            "event_during_treatment_fraction": self.event_during_treatment_fraction,
        }
        for name, value in probabilities.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if len(self.age_probs) != 3 or any(p < 0 for p in self.age_probs) or not math.isclose(sum(self.age_probs), 1.0):
            raise ValueError(f"age_probs must be three non-negative values summing to 1, got {self.age_probs}")
        if not 0.0 <= self.toxicity_loading < 1.0:
            raise ValueError(f"toxicity_loading must lie in [0, 1), got {self.toxicity_loading}")
        if not -1.0 < self.toxicity_hazard_link < 1.0:
            raise ValueError(f"toxicity_hazard_link must lie in (-1, 1), got {self.toxicity_hazard_link}")
        if self.baseline_hazard <= 0 or self.censoring_rate <= 0:
            raise ValueError("baseline_hazard and censoring_rate must be positive")
        if len(self.beta) != len(COX_TERMS):
            raise ValueError(f"beta must have {len(COX_TERMS)} entries, got {len(self.beta)}")
        if not 0.0 <= self.positivity_floor < 1.0 / 3.0:
            raise ValueError(f"positivity_floor must lie in [0, 1/3), got {self.positivity_floor}")
        bounds = self.rdi_bounds
        if len(bounds) != 4 or any(b <= a for a, b in zip(bounds, bounds[1:])) or bounds[0] <= 0:
            raise ValueError(f"rdi_bounds must be four increasing positive values, got {bounds}")
        if self.max_delay < 0:
            raise ValueError("max_delay must be non-negative")
        if set(self.toxicity_cutpoints) != set(TOXICITY_NAMES):
            raise ValueError("toxicity_cutpoints must cover every toxicity")
        for name, cuts in self.toxicity_cutpoints.items():
            if len(cuts) != 4 or any(b <= a for a, b in zip(cuts, cuts[1:])):
                raise ValueError(f"cutpoints of {name} must be four increasing values")
        for a in (1, 2):
            missing = set(EXPOSURE_FEATURES) - set(self.exposure_coefficients.get(a, {}))
            if missing:
                raise ValueError(f"exposure coefficients of category {a} miss {sorted(missing)}")

    def replace(self, **changes: Any) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        payload = dataclasses.asdict(self)
        payload["exposure_coefficients"] = {str(a): dict(c) for a, c in self.exposure_coefficients.items()}
        payload["toxicity_cutpoints"] = {k: list(v) for k, v in self.toxicity_cutpoints.items()}
        for key in ("age_probs", "beta", "rdi_bounds"):
            payload[key] = list(payload[key])
        return payload

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SimConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"Unknown simulation parameters: {sorted(unknown)}")
        return cls(**dict(payload))


PRESETS: Dict[str, Dict[str, Any]] = {
    "default": {},
    "null": {"beta": (0.0, 0.0, 0.0, 0.0, 0.0), "toxicity_hazard_link": 0.0},
    "strong": {
        "n": 5000,
        "toxicity_hazard_link": 0.8,
        "positivity_floor": 0.005,
        "exposure_coefficients": {
            1: _exposure_coefficients(-2.4, 0.3, 0.2, 0.4, -0.1, 0.05, 0.25),
            2: _exposure_coefficients(-4.6, 0.4, 0.3, 0.6, -0.1, 0.08, 0.45),
        },
    },
    "extreme": {
        "toxicity_hazard_link": 0.8,
        "positivity_floor": 0.0,
        "exposure_coefficients": {
            1: _exposure_coefficients(-2.5, 0.3, 0.2, 0.4, -0.1, 0.05, 0.30),
            2: _exposure_coefficients(-8.0, 0.4, 0.3, 0.6, -0.1, 0.08, 1.50),
        },
    },
}


def preset(name: str = "default", **overrides: Any) -> SimConfig:
    if name not in PRESETS:
        raise ValueError(f"Unknown simulation preset '{name}', choose from {sorted(PRESETS)}")
    params = dict(PRESETS[name])
    params.update(overrides)
    return SimConfig(**params)


@dataclass(frozen=True)
class SimTruth:
    """Known outcome model of a simulated dataset"""

    beta: Tuple[float, ...]
    baseline_hazard: float
    censoring_rate: float
    seed: int
    n: int

    def hazard_ratio(self, exposure: int, effect_modifier: int) -> float:
        return math.exp(float(pattern_row(exposure, effect_modifier) @ np.asarray(self.beta)))

    def survival(self, exposure: int, effect_modifier: int, t):
        rate = self.baseline_hazard * self.hazard_ratio(exposure, effect_modifier)
        return np.exp(-rate * np.asarray(t, dtype=float))

    def rmst(self, exposure: int, effect_modifier: int, t: float) -> float:
        """Closed form (1 - exp(-rate t)) / rate"""
        rate = self.baseline_hazard * self.hazard_ratio(exposure, effect_modifier)
        return -math.expm1(-rate * t) / rate

    def cate(self, exposure: int, effect_modifier: int, t: float) -> float:
        return self.rmst(exposure, effect_modifier, t) - self.rmst(0, effect_modifier, t)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta": dict(zip(COX_TERMS, self.beta)),
            "baseline_hazard": self.baseline_hazard,
            "censoring_rate": self.censoring_rate,
            "seed": self.seed,
            "n": self.n,
        }


def true_cate(truth: SimTruth, exposure: int, effect_modifier: int, t: float, epsabs: float = 1e-6) -> float:
    """CATE by adaptive integration of the true survival difference"""
    if t <= 0:
        return 0.0

    def difference(s: float) -> float:
        return float(truth.survival(exposure, effect_modifier, s) - truth.survival(0, effect_modifier, s))

    value, _ = quad(difference, 0.0, t, epsabs=epsabs)
    return float(value)


@dataclass(frozen=True)
class SimulationResult:
    records: List[PatientRecord]
    covariates: List[DerivedCovariates]
    truth: SimTruth
    exposure_probabilities: np.ndarray
    injected: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)


def _grades(config: SimConfig, rng: np.random.Generator, susceptibility: np.ndarray) -> Dict[Period, Dict[str, np.ndarray]]:
    loading = config.toxicity_loading
    noise_scale = math.sqrt(1.0 - loading ** 2)
    result = {}
    for period in Period:
        shift = config.post_shift if period is Period.POST else 0.0
        grades = {}
        for name in TOXICITY_NAMES:
            latent = loading * susceptibility + noise_scale * rng.standard_normal(len(susceptibility)) + shift
            cuts = np.asarray(config.toxicity_cutpoints[name])
            grades[name] = np.searchsorted(cuts, latent, side="right")
        result[period] = grades
    return result


def _motox(grades: Dict[str, np.ndarray], names: Tuple[str, ...]) -> np.ndarray:
    stacked = np.column_stack([grades[name] for name in names]).astype(float)
    return stacked.mean(axis=1) + stacked.max(axis=1)


def _cycles(config: SimConfig, rng: np.random.Generator, exposure: int, trial: Trial) -> List[CycleRecord]:
    """Six cycles whose RDI falls inside the exposure's interval"""
    lowest, reduced, standard, highest = config.rdi_bounds
    interval = {0: (standard, highest), 1: (reduced, standard), 2: (lowest, reduced)}[exposure]
    margin = config.rdi_margin
    rdi = rng.uniform(interval[0] + margin, interval[1] - margin)

    longest = max(1.0, min(1.0 / rdi, 1.0 + config.max_delay))
    gamma_target = rng.uniform(1.0, longest)
    cycle6_start = int(round(ANTICIPATED_TREATMENT_DAYS * gamma_target - CYCLE6_TREATMENT_DAYS))
    gamma = (cycle6_start + CYCLE6_TREATMENT_DAYS) / ANTICIPATED_TREATMENT_DAYS
    delta = rdi * gamma

    cddp = round(ANTICIPATED_CDDP_MG_M2 * delta, 2)
    dox = round(ANTICIPATED_DOX_MG_M2 * delta, 2)
    offsets = np.concatenate([[0], np.cumsum(CYCLE_GAPS[trial])])
    starts = [int(round(offset * cycle6_start / ANTICIPATED_CYCLE6_START)) for offset in offsets]
    return [CycleRecord(j + 1, cddp, dox, starts[j]) for j in range(N_CYCLES)]


def simulate(config: Optional[SimConfig] = None) -> SimulationResult:
    """
    Draw one dataset.

    Raises:
        PositivityFloorViolated: some subject's exposure probability falls
            below ``config.positivity_floor``
    """
    config = config or SimConfig()
    rng = np.random.default_rng(config.seed)
    n = config.n

    bo06 = rng.random(n) < config.p_bo06
    age = rng.choice(3, size=n, p=config.age_probs)
    male = rng.random(n) < config.p_male

    rank = np.clip(rng.random(n), 1e-12, 1.0 - 1e-12)
    link = config.toxicity_hazard_link
    susceptibility = link * norm.ppf(rank) + math.sqrt(1.0 - link ** 2) * rng.standard_normal(n)
    grades = _grades(config, rng, susceptibility)
    motox = {
        (ToxicitySet.RULE, Period.PRE): _motox(grades[Period.PRE], RULE_TOXICITIES),
        (ToxicitySet.RULE, Period.POST): _motox(grades[Period.POST], RULE_TOXICITIES),
        (ToxicitySet.GEN, Period.PRE): _motox(grades[Period.PRE], GENERIC_TOXICITIES),
        (ToxicitySet.GEN, Period.POST): _motox(grades[Period.POST], GENERIC_TOXICITIES),
    }

    features = {
        "intercept": np.ones(n),
        "BO06": bo06.astype(float),
        "adolescent": (age == 1).astype(float),
        "adult": (age == 2).astype(float),
        "male": male.astype(float),
        "motox_gen_pre": motox[(ToxicitySet.GEN, Period.PRE)],
        "motox_rule_pre": motox[(ToxicitySet.RULE, Period.PRE)],
        "motox_gen_post": motox[(ToxicitySet.GEN, Period.POST)],
        "motox_rule_post": motox[(ToxicitySet.RULE, Period.POST)],
    }
    X = np.column_stack([features[name] for name in EXPOSURE_FEATURES])
    coefs = np.array([[config.exposure_coefficients[a][name] for name in EXPOSURE_FEATURES] for a in (1, 2)])
    probabilities = softmax(np.column_stack([np.zeros(n), X @ coefs.T]), axis=1)
    if config.positivity_floor > 0:
        lowest = probabilities.min(axis=1)
        if np.any(lowest < config.positivity_floor):
            subject = int(np.argmin(lowest))
            raise PositivityFloorViolated(subject, float(lowest[subject]), config.positivity_floor)
    exposure = np.array([rng.choice(3, p=p) for p in probabilities])

    modifier = (rng.random(n) < config.hre_prevalence).astype(int)
    necrosis = np.where(modifier == 1, rng.uniform(0.9, 1.0, n), rng.uniform(0.0, 0.9, n))

    beta = np.asarray(config.beta)
    risk = np.exp(np.array([pattern_row(a, v) @ beta for a, v in zip(exposure, modifier)]))
    event_time = -np.log(rank) / (config.baseline_hazard * risk)
    censor_time = rng.exponential(1.0 / config.censoring_rate, n)
    observed = np.minimum(event_time, censor_time)
    event = event_time <= censor_time

    missing_hre = rng.random(n) < config.missing_hre_fraction
    incomplete = rng.random(n) < config.incomplete_treatment_fraction
    early_event = rng.random(n) < config.event_during_treatment_fraction

    width = len(str(n))
    records, covariates = [], []
    for i in range(n):
        patient_id = f"S{i + 1:0{width}d}"
        trial = Trial.BO06 if bo06[i] else Trial.BO03
        cycles = _cycles(config, rng, int(exposure[i]), trial)
        delta, gamma = standardized_dose(cycles), standardized_time(cycles)
        if incomplete[i]:
            cycles = cycles[: int(rng.integers(3, N_CYCLES))]
        toxicity = make_toxicity(
            {name: int(grades[Period.PRE][name][i]) for name in TOXICITY_NAMES},
            {name: int(grades[Period.POST][name][i]) for name in TOXICITY_NAMES},
        )
        records.append(
            PatientRecord(
                id=patient_id,
                trial=trial,
                age_group=(AgeGroup.CHILD, AgeGroup.ADOLESCENT, AgeGroup.ADULT)[int(age[i])],
                gender=Gender.MALE if male[i] else Gender.FEMALE,
                cycles=tuple(cycles),
                toxicity=toxicity,
                hre_necrosis_pct=None if missing_hre[i] else float(necrosis[i]),
                efs_time_months=float(observed[i]),
                efs_event=bool(event[i]),
                completed_treatment=not incomplete[i],
                had_surgery=True,
                event_during_treatment=bool(early_event[i]),
            )
        )
        covariates.append(
            DerivedCovariates(
                id=patient_id,
                delta=delta,
                gamma=gamma,
                rdi=delta / gamma,
                exposure=int(exposure[i]),
                effect_modifier=int(modifier[i]),
                motox={key: float(motox[key][i]) for key in MOTOX_KEYS},
            )
        )

    injected = {
        "missing HRe": tuple(r.id for r, flag in zip(records, missing_hre) if flag),
        "incomplete treatment": tuple(r.id for r, flag in zip(records, incomplete) if flag),
        "event during treatment": tuple(r.id for r, flag in zip(records, early_event) if flag),
    }
    truth = SimTruth(
        beta=tuple(config.beta),
        baseline_hazard=config.baseline_hazard,
        censoring_rate=config.censoring_rate,
        seed=config.seed,
        n=n,
    )
    logger.info(
        "Simulated %d patients: exposure counts %s, %d events",
        n,
        np.bincount(exposure, minlength=3).tolist(),
        int(event.sum()),
    )
    return SimulationResult(records, covariates, truth, probabilities, injected)

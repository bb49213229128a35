"""
Pipeline configuration.

One JSON document configures every stage. Unknown keys are rejected so a
misspelled option fails loudly instead of silently falling back to its
default. Command-line overrides are applied after loading and the result
is validated again.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Type, TypeVar, Union

import numpy as np

from .estimation.iptw import SpecId
from .estimation.splines import KnotRule
from .estimation.survival import TieMethod
from .records.io import Schema
from .simulation import PRESETS, SimConfig, preset

logger = logging.getLogger(__name__)

C = TypeVar("C")


class ConfigError(Exception):
    """Invalid or inconsistent pipeline configuration"""
    pass


@dataclass(frozen=True)
class InputConfig:
    path: Optional[str] = None
    schema: str = Schema.LONG.value


@dataclass(frozen=True)
class SimulateConfig:
    """Preset name plus any SimConfig fields overriding it"""

    preset: str = "default"
    params: Mapping[str, Any] = field(default_factory=dict)

    def build(self, seed: Optional[int] = None) -> SimConfig:
        params = dict(self.params)
        if seed is not None:
            params["seed"] = seed
        return preset(self.preset, **params)


@dataclass(frozen=True)
class WeightsConfig:
    spec: str = SpecId.IPTW1.value
    compare: Tuple[str, ...] = tuple(s.value for s in SpecId)
    mean_tolerance: float = 0.05
    max_weight: float = 10.0
    truncate_percentile: Optional[float] = None
    workers: int = 1


@dataclass(frozen=True)
class GlmConfig:
    tol: float = 1e-8
    max_iter: int = 100
    knot_rule: str = KnotRule.QUANTILE.value


@dataclass(frozen=True)
class FitConfig:
    tie_method: str = TieMethod.BRESLOW.value
    tol: float = 1e-9
    max_iter: int = 50


@dataclass(frozen=True)
class EffectsConfig:
    horizon: float = 60.0
    grid_start: float = 1.0
    grid_stop: float = 60.0
    grid_step: float = 1.0
    bootstrap_B: int = 1000
    seed: int = 0
    level: float = 0.95
    reestimate_weights: bool = False
    workers: int = 1
    store_replicates: bool = False
    max_failure_rate: float = 0.05

    @property
    def grid(self) -> np.ndarray:
        """Evaluation horizons grid_start, grid_start + step, ... up to grid_stop"""
        n = int(np.floor((self.grid_stop - self.grid_start) / self.grid_step + 1e-9)) + 1
        return np.round(self.grid_start + self.grid_step * np.arange(n), 10)


@dataclass(frozen=True)
class PipelineConfig:
    """Complete configuration of a pipeline run"""

    input: InputConfig = field(default_factory=InputConfig)
    simulate: Optional[SimulateConfig] = None
    weights: WeightsConfig = field(default_factory=WeightsConfig)
    glm: GlmConfig = field(default_factory=GlmConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    effects: EffectsConfig = field(default_factory=EffectsConfig)
    out_dir: str = "out"

    def validate(self, check_paths: bool = True) -> "PipelineConfig":
        """
        Check every section; returns self so calls can be chained.

        Raises:
            ConfigError: first problem found
        """
        try:
            Schema(self.input.schema)
            SpecId.parse(self.weights.spec)
            for name in self.weights.compare:
                SpecId.parse(name)
            KnotRule(self.glm.knot_rule)
            TieMethod(self.fit.tie_method)
        except ValueError as e:
            raise ConfigError(str(e)) from e

        if self.simulate is None and self.input.path is None:
            raise ConfigError("Configure either input.path or a simulate section")
        if check_paths and self.simulate is None and not Path(self.input.path).exists():
            raise ConfigError(f"Input path does not exist: {self.input.path}")
        if self.simulate is not None:
            if self.simulate.preset not in PRESETS:
                raise ConfigError(f"Unknown simulation preset '{self.simulate.preset}'")
            try:
                self.simulate.build()
            except (TypeError, ValueError) as e:
                raise ConfigError(f"simulate: {e}") from e

        w = self.weights
        if w.mean_tolerance <= 0 or w.max_weight <= 1:
            raise ConfigError("weights.mean_tolerance must be > 0 and weights.max_weight > 1")
        if w.truncate_percentile is not None and not 50.0 < w.truncate_percentile <= 100.0:
            raise ConfigError("weights.truncate_percentile must lie in (50, 100]")
        if w.workers < 1 or self.effects.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name, section in (("glm", self.glm), ("fit", self.fit)):
            if section.tol <= 0 or section.max_iter < 1:
                raise ConfigError(f"{name}.tol must be > 0 and {name}.max_iter >= 1")

        e = self.effects
        if e.bootstrap_B < 1:
            raise ConfigError(f"effects.bootstrap_B must be >= 1, got {e.bootstrap_B}")
        if e.horizon <= 0 or e.grid_step <= 0 or not 0 < e.grid_start <= e.grid_stop:
            raise ConfigError("effects grid needs 0 < grid_start <= grid_stop and grid_step > 0")
        if e.grid_stop > e.horizon:
            raise ConfigError(f"effects.grid_stop {e.grid_stop} exceeds the horizon {e.horizon}")
        if not 0 < e.level < 1:
            raise ConfigError("effects.level must lie in (0, 1)")
        if not 0 <= e.max_failure_rate < 1:
            raise ConfigError("effects.max_failure_rate must lie in [0, 1)")
        return self

    def with_overrides(
        self,
        seed: Optional[int] = None,
        out: Optional[str] = None,
        spec: Optional[str] = None,
        bootstrap_B: Optional[int] = None,
        tie: Optional[str] = None,
    ) -> "PipelineConfig":
        """Apply command-line overrides; a seed applies to simulation and bootstrap"""
        config = self
        if seed is not None:
            config = dataclasses.replace(config, effects=dataclasses.replace(config.effects, seed=seed))
            if config.simulate is not None:
                params = dict(config.simulate.params, seed=seed)
                config = dataclasses.replace(config, simulate=dataclasses.replace(config.simulate, params=params))
        if out is not None:
            config = dataclasses.replace(config, out_dir=str(out))
        if spec is not None:
            config = dataclasses.replace(config, weights=dataclasses.replace(config.weights, spec=spec.upper()))
        if bootstrap_B is not None:
            config = dataclasses.replace(config, effects=dataclasses.replace(config.effects, bootstrap_B=bootstrap_B))
        if tie is not None:
            config = dataclasses.replace(config, fit=dataclasses.replace(config.fit, tie_method=tie))
        return config

    def to_dict(self) -> Dict[str, Any]:
        payload = dataclasses.asdict(self)
        payload["weights"]["compare"] = list(self.weights.compare)
        return payload


def _section(cls: Type[C], payload: Any, name: str) -> C:
    if payload is None:
        return cls()
    if not isinstance(payload, Mapping):
        raise ConfigError(f"Section '{name}' must be a JSON object")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in '{name}': {', '.join(unknown)}")
    values = dict(payload)
    if "compare" in values:
        values["compare"] = tuple(str(s).upper() for s in values["compare"])
    if "spec" in values:
        values["spec"] = str(values["spec"]).upper()
    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigError(f"Section '{name}': {e}") from e


def _simulate_section(payload: Any) -> Optional[SimulateConfig]:
    if payload is None:
        return None
    if not isinstance(payload, Mapping):
        raise ConfigError("Section 'simulate' must be a JSON object")
    params = dict(payload)
    name = params.pop("preset", "default")
    known = {f.name for f in dataclasses.fields(SimConfig)}
    unknown = sorted(set(params) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in 'simulate': {', '.join(unknown)}")
    return SimulateConfig(preset=name, params=params)


def config_from_dict(payload: Mapping[str, Any]) -> PipelineConfig:
    sections = {"input", "simulate", "weights", "glm", "fit", "effects", "out_dir"}
    unknown = sorted(set(payload) - sections)
    if unknown:
        raise ConfigError(f"Unknown configuration sections: {', '.join(unknown)}")
    return PipelineConfig(
        input=_section(InputConfig, payload.get("input"), "input"),
        simulate=_simulate_section(payload.get("simulate")),
        weights=_section(WeightsConfig, payload.get("weights"), "weights"),
        glm=_section(GlmConfig, payload.get("glm"), "glm"),
        fit=_section(FitConfig, payload.get("fit"), "fit"),
        effects=_section(EffectsConfig, payload.get("effects"), "effects"),
        out_dir=str(payload.get("out_dir", "out")),
    )


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """
    Read a configuration file; without a path the defaults with the
    ``default`` simulation preset are returned.

    Raises:
        ConfigError: unreadable file, invalid JSON or unknown keys
    """
    if path is None:
        logger.debug("No configuration file, simulating with the default preset")
        return PipelineConfig(simulate=SimulateConfig())
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e
    if not isinstance(payload, Mapping):
        raise ConfigError(f"{path}: top level must be a JSON object")
    config = config_from_dict(payload)
    logger.debug("Loaded configuration from %s", path)
    return config

"""Experiment configuration: one YAML file per experiment, validated on load."""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .control import ControllerGains
from .dynamics import InertiaModel
from .harness import Jitter, ManeuverSpec
from .mps import PfmWeights, SelectorConfig

Matrix = list[list[float]]


class ConfigInvalid(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class IoFailure(OSError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _matrix(value, scale_base: np.ndarray) -> np.ndarray:
    if isinstance(value, (int, float)):
        return float(value) * scale_base
    return np.array(value, dtype=np.float64)


class GainsConfig(_Strict):
    """Scalars are multiples of the inertia matrix; nested lists are full matrices."""

    K_n: Union[float, Matrix] = 900.0
    K_omega: Union[float, Matrix] = 90.0


class WeightsConfig(_Strict):
    """Scalars are multiples of the identity; nested lists are full matrices."""

    R: Union[float, Matrix] = 1.0
    Q: Union[float, Matrix] = 1e-6


class SelectorSection(_Strict):
    t_h: float = Field(0.4, gt=0)
    prediction_dt: float = Field(0.002, gt=0, le=0.01)
    delta: float = Field(5e-7, gt=0)
    sigma_init: Literal[-1, 1] = 1


class JitterSection(_Strict):
    attitude: float = Field(0.0, ge=0)
    rate: float = Field(0.0, ge=0)


class ManeuverSection(_Strict):
    id: str
    omega0: list[float] = Field(default_factory=lambda: [0.0, 0.0, 2.0], min_length=3, max_length=3)
    psi0_deg: float = Field(gt=0, lt=360)
    stage1_duration: float = Field(0.5, ge=0)
    control_dt: float = Field(0.002, gt=0, le=0.01)
    n_samples_stage3: int = Field(1500, ge=1)


class ExperimentConfig(_Strict):
    inertia: Union[list[float], Matrix] = Field(default_factory=lambda: [1.66e-5, 1.66e-5, 2.93e-5])
    gains: GainsConfig = GainsConfig()
    weights: WeightsConfig = WeightsConfig()
    selector: SelectorSection = SelectorSection()
    jitter: JitterSection = JitterSection()
    torque_limit: Optional[float] = Field(None, gt=0)
    omega_bound: float = Field(200.0, gt=0)
    controllers: list[Literal["continuous", "benchmark", "mps"]] = Field(
        default_factory=lambda: ["benchmark", "mps"], min_length=1)
    maneuvers: list[ManeuverSection] = Field(min_length=1)
    trials: int = Field(10, ge=1)
    seed: int = 0
    output_dir: str = "out"

    @field_validator("maneuvers")
    @classmethod
    def _unique_ids(cls, v):
        ids = [m.id for m in v]
        if len(set(ids)) != len(ids):
            raise ValueError("maneuver ids must be unique")
        return v

    # domain objects

    def inertia_model(self) -> InertiaModel:
        if self.inertia and not isinstance(self.inertia[0], list):
            if len(self.inertia) != 3:
                raise ConfigInvalid("inertia", "diagonal inertia needs exactly 3 entries")
            return InertiaModel.diagonal(*self.inertia)
        return InertiaModel(np.array(self.inertia, dtype=np.float64))

    def controller_gains(self) -> ControllerGains:
        J = self.inertia_model().J
        return ControllerGains(_matrix(self.gains.K_n, J), _matrix(self.gains.K_omega, J))

    def pfm_weights(self) -> PfmWeights:
        return PfmWeights(_matrix(self.weights.R, np.eye(3)), _matrix(self.weights.Q, np.eye(3)))

    def selector_config(self) -> SelectorConfig:
        s = self.selector
        return SelectorConfig(s.t_h, s.prediction_dt, s.delta, s.sigma_init)

    def maneuver_specs(self) -> list[ManeuverSpec]:
        return [ManeuverSpec(tuple(m.omega0), math.radians(m.psi0_deg), m.stage1_duration,
                             m.control_dt, m.n_samples_stage3, m.id) for m in self.maneuvers]

    def maneuver(self, maneuver_id: str) -> ManeuverSpec:
        for spec in self.maneuver_specs():
            if spec.name == maneuver_id:
                return spec
        raise ConfigInvalid("maneuvers", f"no maneuver with id {maneuver_id!r}")

    def run_kwargs(self) -> dict:
        return dict(
            gains=self.controller_gains(),
            weights=self.pfm_weights(),
            selector=self.selector_config(),
            inertia=self.inertia_model(),
            jitter=Jitter(self.jitter.attitude, self.jitter.rate),
            torque_limit=self.torque_limit,
            omega_bound=self.omega_bound,
        )

    def validate_domain(self) -> None:
        """Build every domain object once so invariant violations surface at load time."""
        checks = [
            ("inertia", self.inertia_model),
            ("gains", self.controller_gains),
            ("weights", self.pfm_weights),
            ("selector", self.selector_config),
        ]
        for name, build in checks:
            try:
                build()
            except ConfigInvalid:
                raise
            except ValueError as exc:
                raise ConfigInvalid(name, str(exc)) from None
        for i, m in enumerate(self.maneuvers):
            try:
                ManeuverSpec(tuple(m.omega0), math.radians(m.psi0_deg), m.stage1_duration,
                             m.control_dt, m.n_samples_stage3, m.id)
            except ValueError as exc:
                raise ConfigInvalid(f"maneuvers.{i}", str(exc)) from None

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def parse_config(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("<root>", "config must be a mapping")
    try:
        cfg = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ConfigInvalid(loc, first["msg"]) from None
    cfg.validate_domain()
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigInvalid("config", f"file not found: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid("config", f"YAML parse error: {exc}".replace("\n", " ")) from None
    return parse_config(data)


def default_config_text() -> str:
    return resources.files("mps_attitude").joinpath("data/default.yaml").read_text()


def default_config() -> ExperimentConfig:
    return parse_config(yaml.safe_load(default_config_text()))

"""Versioned JSON scenario configuration.

Every section is a dataclass; parsing rejects unknown keys and
``to_dict(parse(d)) == d`` for any fully specified document.
"""
from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from ..control import ControllerConfig, Reference
from ..errors import ConfigurationError
from ..fxt_id import AdaptationGains
from ..observables import BasisSet, make_monomial_basis, make_paper_basis
from ..plant import NoiseModel, WindField
from ..safety import ObstacleCbf

SCHEMA_VERSION = 1


@dataclass
class PlantSection:
    z0: list[float] = field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])


@dataclass
class WindSection:
    amp_x: float = 5.0
    amp_y: float = 5.0
    k: list[float] = field(default_factory=lambda: [0.5, 0.3, 0.4, 0.6])
    mean_x: float = 2.0
    mean_y: float = -1.0
    drag: float = 1.0
    D: float = 10.0
    enabled: bool = True


@dataclass
class NoiseSection:
    sigma_x: float = 0.01
    sigma_xdot: float = 0.05


@dataclass
class BasisSection:
    family: str = "sinusoid"
    harmonics: list[int] = field(default_factory=lambda: [1, 2])
    degree: int = 2
    states: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    include_constant: bool = True


@dataclass
class AdaptationSection:
    target_T: float = 0.12
    # sqrt(ab) = 1 keeps gamma at its a = b = 1 value; a << b damps the
    # response to innovation jumps caused by input switching
    a: float = 1e-3
    b: float = 1e3
    w: float = 4.0
    s: float = 1.0
    D: float = 10.0
    method: str = "flow"
    nu_floor: float = 1e-9
    baseline_refit_period: float = 0.5


@dataclass
class ObstacleSection:
    center: list[float]
    radius: float


@dataclass
class SafetySection:
    obstacles: list[ObstacleSection] = field(
        default_factory=lambda: [ObstacleSection([-2.5, 0.0], 1.5), ObstacleSection([2.0, -1.0], 1.5)]
    )
    k1: float = 1.0
    alpha_gain: float = 1.0
    omega: float = 1.0


@dataclass
class ReferenceSection:
    amplitude: float = 4.0
    omega: float = 0.6283185307179586


@dataclass
class ControllerSection:
    kp: float = 4.0
    kd: float = 4.0
    u_max: Optional[float] = None
    use_slack: bool = True
    slack_weight: float = 1000.0
    max_iter: int = 100
    reference: ReferenceSection = field(default_factory=ReferenceSection)


@dataclass
class IntegrationSection:
    dt: float = 1e-3
    horizon: float = 20.0
    method: str = "rk4"
    decimation: int = 10


@dataclass
class ScenarioConfig:
    schema_version: int = SCHEMA_VERSION
    name: str = "scenario"
    plant: PlantSection = field(default_factory=PlantSection)
    wind: WindSection = field(default_factory=WindSection)
    noise: NoiseSection = field(default_factory=NoiseSection)
    basis: BasisSection = field(default_factory=BasisSection)
    adaptation: AdaptationSection = field(default_factory=AdaptationSection)
    safety: SafetySection = field(default_factory=SafetySection)
    controller: ControllerSection = field(default_factory=ControllerSection)
    integration: IntegrationSection = field(default_factory=IntegrationSection)

    # -- builders ---------------------------------------------------------
    def build_basis(self) -> BasisSet:
        b = self.basis
        n = len(self.plant.z0)
        if b.family == "sinusoid":
            return make_paper_basis(b.harmonics, b.states, b.include_constant, n=n)
        if b.family == "monomial":
            return make_monomial_basis(b.degree, b.states, n=n, include_constant=b.include_constant)
        raise ConfigurationError(f"unknown basis family {b.family!r}")

    def build_gains(self, N: int) -> AdaptationGains:
        a = self.adaptation
        return AdaptationGains.for_settling_time(a.target_T, N, a=a.a, b=a.b, w=a.w, s=a.s)

    def build_wind(self) -> WindField:
        w = self.wind
        return WindField(w.amp_x, w.amp_y, tuple(w.k), w.mean_x, w.mean_y, w.drag, w.D, w.enabled)

    def build_noise(self, seed: int, enabled: bool) -> NoiseModel:
        if not enabled:
            return NoiseModel(0.0, 0.0, seed)
        return NoiseModel(self.noise.sigma_x, self.noise.sigma_xdot, seed)

    def build_obstacles(self) -> list[ObstacleCbf]:
        s = self.safety
        return [ObstacleCbf(tuple(o.center), o.radius, s.k1, s.alpha_gain) for o in s.obstacles]

    def build_controller(self, regime: str) -> ControllerConfig:
        c = self.controller
        return ControllerConfig(
            regime, c.kp, c.kd, c.u_max, self.safety.omega, c.use_slack, c.slack_weight, c.max_iter
        )

    def build_reference(self) -> Reference:
        r = self.controller.reference
        return Reference(r.amplitude, r.omega)

    def validate(self) -> "ScenarioConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigurationError(f"unsupported schema_version {self.schema_version}")
        if len(self.plant.z0) != 4:
            raise ConfigurationError("z0 must have 4 entries")
        i = self.integration
        if not (i.dt > 0 and i.horizon > 0 and i.decimation >= 1):
            raise ConfigurationError("integration needs dt > 0, horizon > 0, decimation >= 1")
        if i.method not in ("euler", "rk4"):
            raise ConfigurationError(f"unknown integration method {i.method!r}")
        if self.adaptation.method not in ("euler", "flow"):
            raise ConfigurationError(f"unknown adaptation method {self.adaptation.method!r}")
        self.build_basis()
        self.build_wind()
        self.build_obstacles()
        self.build_controller("nominal")
        self.build_gains(1)
        return self


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def from_dict(data: dict) -> ScenarioConfig:
    return _build(ScenarioConfig, data, "config").validate()


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
    return from_dict(data)


def dumps(cfg: ScenarioConfig) -> str:
    return json.dumps(to_dict(cfg), indent=2)


def paper_config_path() -> Path:
    return Path(str(resources.files("koopfxt") / "configs" / "paper_case_study.json"))


def load_paper_config() -> ScenarioConfig:
    return load(paper_config_path())


def _build(cls, data: Any, where: str):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{where}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            continue
        kwargs[f.name] = _coerce(hints[f.name], data[f.name], f"{where}.{f.name}")
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc


def _coerce(tp, value, where):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    if origin is typing.Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)][0]
        return _coerce(inner, value, where)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigurationError(f"{where}: expected a list")
        return [_coerce(args[0], v, f"{where}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where}: expected true/false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where}: expected an integer")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{where}: expected a number")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigurationError(f"{where}: expected a string")
        return value
    return value

"""Scenario files: one TOML document per scenario, unknown keys rejected."""

from __future__ import annotations

import dataclasses
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..control import ControllerConfig, GainSchedule, PiGains
from ..kinematics import LegGeometry
from ..leg import KneeLimits, LinkMasses
from ..plant import GroundModel, PlantParams
from ..trajectory import GaitParams
from .experiments import HIP_DEFAULT, KNEE_DEFAULT, ImpactSettings, Scenario


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PiBenchSettings:
    amplitude: float = 10.0
    freq: float = 5.0
    offset: float = 0.0
    duration: float = 1.0


@dataclass(frozen=True)
class SpringSettings:
    deflections: tuple = (-0.05, -0.04, -0.03, -0.02, -0.01, 0.0,
                          0.01, 0.02, 0.03, 0.04, 0.05)
    speed: float = 0.01
    margin: float = 0.01
    settle: float = 0.3


@dataclass(frozen=True)
class TrackingSettings:
    amplitude: float = 0.03
    freq: float = 2.0
    center: float = 0.27
    settle: float = 1.0


@dataclass(frozen=True)
class StabilitySettings:
    margin: float = 0.5
    bound: str = "popov"
    n_kd: int = 9


@dataclass
class Config:
    """A resolved scenario plus the settings of every experiment."""
    scenario: Scenario
    pi_bench: PiBenchSettings = PiBenchSettings()
    characterization: SpringSettings = SpringSettings()
    tracking: TrackingSettings = TrackingSettings()
    impact: ImpactSettings = ImpactSettings()
    swing: GaitParams = GaitParams()
    stability: StabilitySettings = StabilitySettings()
    source: str = "<defaults>"
    raw: dict = field(default_factory=dict)


_TOP = {"name", "dt", "duration", "body_mass_share", "stance_radius"}
_SECTIONS = {
    "hip": PlantParams, "knee": PlantParams, "geometry": LegGeometry, "links": LinkMasses,
    "ground": GroundModel, "knee_limits": KneeLimits, "gains": PiGains,
    "controller": ControllerConfig,
}
_SETTINGS = {
    "pi_bench": PiBenchSettings, "characterization": SpringSettings,
    "tracking": TrackingSettings, "impact": ImpactSettings, "swing": GaitParams,
    "stability": StabilitySettings,
}


def _build(cls, table, where, base=None):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(table) - set(names))
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    values = {}
    for key, value in table.items():
        if isinstance(value, list):
            value = tuple(value)
        elif isinstance(value, int) and not isinstance(value, bool) and names[key].type == "float":
            value = float(value)
        values[key] = value
    try:
        if base is not None:
            return dataclasses.replace(base, **values)
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def resolve(doc: dict, source: str = "<dict>") -> Config:
    """Turn a parsed scenario document into a :class:`Config`."""
    allowed = _TOP | set(_SECTIONS) | set(_SETTINGS) | {"schedules"}
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) at top level: {', '.join(unknown)}")
    scen = {}
    for key in _TOP & set(doc):
        value = doc[key]
        scen[key] = value if key == "name" else float(value)
    defaults = {"hip": HIP_DEFAULT, "knee": KNEE_DEFAULT}
    for key, cls in _SECTIONS.items():
        if key in doc:
            scen[key] = _build(cls, doc[key], key, defaults.get(key))
    if "schedules" in doc:
        if not isinstance(doc["schedules"], list) or not doc["schedules"]:
            raise ConfigError("schedules must be a non-empty array of tables")
        scen["schedules"] = [_build(GainSchedule, s, f"schedules.{i}")
                             for i, s in enumerate(doc["schedules"])]
    try:
        scenario = Scenario(**scen)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    settings = {key: _build(cls, doc[key], key) for key, cls in _SETTINGS.items() if key in doc}
    return Config(scenario=scenario, source=source, raw=doc, **settings)


def load_config(path) -> Config:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return resolve(doc, str(path))


def builtin_config(name: str) -> Config:
    """One of the scenario files shipped with the package."""
    ref = resources.files("wireleg.harness") / "configs" / f"{name}.toml"
    if not ref.is_file():
        raise ConfigError(f"no built-in config {name!r}; available: {', '.join(builtin_names())}")
    with ref.open("rb") as fh:
        return resolve(tomllib.load(fh), f"builtin:{name}")


def builtin_names() -> list:
    folder = resources.files("wireleg.harness") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".toml"))

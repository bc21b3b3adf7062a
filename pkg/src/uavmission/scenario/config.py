"""Scenario configuration loaded from YAML."""
from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..geometry import Position
from ..planner.search import SolverConfig
from ..sim import Entity, Limits, SensorModel, ThreatZone, WorldTruth


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AreaParams:
    side: float = 3000.0
    spacing: float = 600.0
    ring: int = 1  # planning-grid margin, in cells, around the surveyed square

    def __post_init__(self):
        if self.side <= 0 or self.spacing <= 0:
            raise ConfigError("area side and spacing must be positive")
        if self.spacing > self.side:
            raise ConfigError("waypoint spacing cannot exceed the area side")
        if self.ring < 0:
            raise ConfigError("ring must be >= 0")


@dataclass(frozen=True)
class Altitudes:
    survey: float = 120.0
    acquisition: float = 60.0
    inspection_max: float = 80.0  # cells count as scanned only at or below this altitude

    def __post_init__(self):
        if min(self.survey, self.acquisition, self.inspection_max) < 0:
            raise ConfigError("altitudes must be >= 0")


@dataclass(frozen=True)
class BaselineParams:
    standoff_margin: float = 200.0
    threat_radius: float = 400.0
    sample_step: float = 10.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    world: WorldTruth
    uav_start: Position
    uav_course: float
    route: tuple[Position, ...]
    limits: Limits = Limits()
    sensor: SensorModel = SensorModel()
    lateral_cover: float = 300.0
    area: AreaParams = AreaParams()
    altitudes: Altitudes = Altitudes()
    solver: SolverConfig = SolverConfig()
    baseline: BaselineParams = BaselineParams()
    dt: float = 0.5
    max_ticks: int = 20000
    seed: int = 0
    jitter: float = 0.0
    grid_orientation: float = 0.0
    anchor: tuple[float, float] = (0.0, 0.0)  # lat, lon of the local origin, for exports
    package: str | None = None
    dp_latency: int = 0
    request_timeout: int = 200
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if not self.route:
            raise ConfigError("route needs at least one waypoint")
        if self.grid_orientation != 0.0:
            raise ConfigError("only grid_orientation 0 (axes east/north) is supported")
        if 2 * self.lateral_cover < self.area.spacing:
            raise ConfigError("sensor swath (2 x lateral_cover) is narrower than the track spacing")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = seed
        return config_from_dict(raw)


def _pos(d: dict, alt: float = 0.0) -> Position:
    return Position(float(d["x"]), float(d["y"]), float(d.get("alt", alt)))


def _sub(d: dict, key: str) -> dict:
    v = d.get(key) or {}
    if not isinstance(v, dict):
        raise ConfigError(f"{key} must be a mapping")
    return v


def config_from_dict(d: dict[str, Any]) -> ScenarioConfig:
    try:
        seed = int(d.get("seed", 0))
        jitter = float(d.get("jitter", 0.0))
        rng = random.Random(seed)

        def shake(p: Position) -> Position:
            if jitter <= 0:
                return p
            return Position(p.x + rng.uniform(-jitter, jitter), p.y + rng.uniform(-jitter, jitter), p.alt)

        w = _sub(d, "world")
        targets = tuple(Entity(str(t["id"]), shake(_pos(t))) for t in w.get("targets", []))
        threats = tuple(ThreatZone(str(t["id"]), shake(_pos(t)), float(t.get("radius", 400.0)))
                        for t in w.get("threats", []))
        bounds = tuple(float(v) for v in w.get("bounds", (-1e6, -1e6, 1e6, 1e6)))
        world = WorldTruth(targets, threats, bounds)
        uav = _sub(d, "uav")
        alts = Altitudes(**_sub(d, "altitudes"))
        sensor_d = dict(_sub(d, "sensor"))
        lateral = float(sensor_d.pop("lateral_cover", 300.0))
        delays = {str(k): int(v) for k, v in (sensor_d.pop("delays", None) or {}).items()}
        sensor = SensorModel(delays=delays, **{k: float(v) for k, v in sensor_d.items()})
        base_d = _sub(d, "baseline")
        if "threat_radius" not in base_d and threats:
            base_d = {**base_d, "threat_radius": threats[0].radius}
        anchor = _sub(d, "anchor")
        return ScenarioConfig(
            name=str(d.get("name", "scenario")),
            world=world,
            uav_start=_pos(uav.get("position", {"x": 0, "y": 0}), alts.survey),
            uav_course=float(uav.get("course", 90.0)),
            route=tuple(_pos(p, alts.survey) for p in d.get("route", [])),
            limits=Limits(**{k: float(v) for k, v in _sub(d, "limits").items()}),
            sensor=sensor,
            lateral_cover=lateral,
            area=AreaParams(**_sub(d, "area")),
            altitudes=alts,
            solver=SolverConfig.from_dict(_sub(d, "solver")) if d.get("solver") else SolverConfig(),
            baseline=BaselineParams(**{k: float(v) for k, v in base_d.items()}),
            dt=float(d.get("dt", 0.5)),
            max_ticks=int(d.get("max_ticks", 20000)),
            seed=seed,
            jitter=jitter,
            grid_orientation=float(d.get("grid_orientation", 0.0)),
            anchor=(float(anchor.get("lat", 0.0)), float(anchor.get("lon", 0.0))),
            package=d.get("package"),
            dp_latency=int(d.get("dp_latency", 0)),
            request_timeout=int(d.get("request_timeout", 200)),
            raw=copy.deepcopy(d),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid scenario config: {exc}") from exc


def load_config(path: str | Path, seed: int | None = None) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        d = yaml.safe_load(fh)
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: scenario file must be a mapping")
    if seed is not None:
        d["seed"] = seed
    d.setdefault("_dir", str(Path(path).resolve().parent))
    d.setdefault("_source", str(Path(path).resolve()))
    return config_from_dict(d)

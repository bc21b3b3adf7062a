"""Deterministic kinematic UAV simulator with sector sensing.

The flight model is constant speed with a bounded turn rate and a fixed climb
rate.  Steering is pure pursuit; a waypoint inside the turning circle is
approached by looping the other way first.  :class:`FlightController` is the
command boundary: it turns high-level coordinator commands into
waypoint-following and reports captures.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

from .geometry import Position, angle_diff, course_between, normalize_course

SECTORS = {"forward": 0.0, "left": -90.0, "right": 90.0}
SWEEP = ("forward", "left", "right")


@dataclass(frozen=True)
class Limits:
    speed: float = 20.0
    v_min: float = 15.0
    v_max: float = 30.0
    turn_rate: float = 20.0  # deg/s
    capture_radius: float = 50.0
    climb_rate: float = 5.0

    def __post_init__(self):
        if not (0 < self.v_min <= self.speed <= self.v_max):
            raise ValueError("need 0 < v_min <= speed <= v_max")
        if self.turn_rate <= 0 or self.capture_radius <= 0 or self.climb_rate <= 0:
            raise ValueError("turn rate, capture radius and climb rate must be positive")

    @property
    def turn_radius(self) -> float:
        return self.speed / math.radians(self.turn_rate)


@dataclass(frozen=True)
class SensorModel:
    range: float = 700.0
    sector_width: float = 90.0
    delays: dict = field(default_factory=dict)  # entity id -> first tick it may be detected

    def sees(self, u: "UavState", p: Position, sector: str) -> bool:
        if u.position.distance_2d(p) > self.range:
            return False
        if u.position.distance_2d(p) == 0.0:
            return True
        bearing = course_between(u.position, p)
        return abs(angle_diff(bearing, u.course + SECTORS[sector])) <= self.sector_width / 2.0


@dataclass(frozen=True)
class Entity:
    id: str
    position: Position


@dataclass(frozen=True)
class ThreatZone:
    id: str
    center: Position
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError(f"threat {self.id} radius must be positive")


@dataclass(frozen=True)
class WorldTruth:
    targets: tuple[Entity, ...] = ()
    threats: tuple[ThreatZone, ...] = ()
    bounds: tuple[float, float, float, float] = (-1e6, -1e6, 1e6, 1e6)

    def __post_init__(self):
        x0, y0, x1, y1 = self.bounds
        for p in [t.position for t in self.targets] + [z.center for z in self.threats]:
            if not (x0 <= p.x <= x1 and y0 <= p.y <= y1):
                raise ValueError(f"entity at ({p.x}, {p.y}) lies outside the scenario bounds")

    def entities(self):
        for t in self.targets:
            yield "target", t.id, t.position
        for z in self.threats:
            yield "threat", z.id, z.center


@dataclass(frozen=True)
class UavState:
    position: Position
    course: float
    speed: float
    tick: int = 0

    def to_dict(self) -> dict:
        return {"x": self.position.x, "y": self.position.y, "alt": self.position.alt,
                "course": self.course, "speed": self.speed, "tick": self.tick}


@dataclass(frozen=True)
class Command:
    kind: str  # goto-waypoint | set-altitude | gimbal-sector
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("goto-waypoint", "set-altitude", "gimbal-sector"):
            raise ValueError(f"unknown command kind {self.kind!r}")
        if self.kind == "gimbal-sector" and self.params.get("sector") not in SECTORS:
            raise ValueError("gimbal-sector needs sector forward, left or right")


@dataclass(frozen=True)
class Detection:
    kind: str
    entity: str
    position: Position
    tick: int
    sector: str

    def to_dict(self) -> dict:
        return {"kind": self.kind, "entity": self.entity, "position": self.position.to_dict(),
                "tick": self.tick, "sector": self.sector}


def step_kinematics(u: UavState, target: Position | None, dt: float, limits: Limits = Limits(),
                    alt_target: float | None = None) -> UavState:
    """Advance one step of ``dt`` seconds toward ``target`` (or straight ahead)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    course = u.course
    speed = min(max(u.speed, limits.v_min), limits.v_max)
    if target is not None and u.position.distance_2d(target) > 0:
        diff = angle_diff(course_between(u.position, target), course)
        r = speed / math.radians(limits.turn_rate)
        c = math.radians(course)
        side = 1.0 if diff > 0 else -1.0
        cx = u.position.x + side * r * math.cos(c)
        cy = u.position.y - side * r * math.sin(c)
        step = limits.turn_rate * dt
        if math.hypot(target.x - cx, target.y - cy) < r:
            # a point inside the turning circle cannot be reached by turning toward it; loop the other way
            course = normalize_course(course - side * step)
        elif abs(diff) > 1e-12:
            course = normalize_course(course + max(-step, min(step, diff)))
    c = math.radians(course)
    d = speed * dt
    alt = u.position.alt
    if alt_target is not None and alt != alt_target:
        dz = limits.climb_rate * dt
        alt = alt_target if abs(alt_target - alt) <= dz else alt + math.copysign(dz, alt_target - alt)
    pos = Position(u.position.x + d * math.sin(c), u.position.y + d * math.cos(c), max(0.0, alt))
    return UavState(pos, course, speed, u.tick + 1)


def sense(u: UavState, world: WorldTruth, sector: str, sensor: SensorModel = SensorModel()) -> list[Detection]:
    if sector not in SECTORS:
        raise ValueError(f"unknown sector {sector!r}")
    out = []
    for kind, eid, pos in world.entities():
        if u.tick >= sensor.delays.get(eid, 0) and sensor.sees(u, pos, sector):
            out.append(Detection(kind, eid, pos, u.tick, sector))
    return out


@dataclass
class ActivePath:
    name: str
    points: list[dict]  # waypoint dicts: position, kind, index
    index: int = 0


class FlightController:
    """Command boundary between the coordinator and the airframe.

    High-level commands: ``follow-route``, ``resume-route``, ``fly-path NAME``,
    ``fly-baseline AREA`` and ``set-altitude ALT``.  ``follow-route`` and
    ``resume-route`` both continue from the first route waypoint not yet
    captured.
    """

    def __init__(self, route: list[dict], limits: Limits,
                 baseline_fn: Callable[[dict, "FlightController"], list[dict]] | None = None):
        self.route = route
        self.limits = limits
        self.baseline_fn = baseline_fn
        self.route_next = 0
        self.path: ActivePath | None = None
        self.alt_override: float | None = None
        self.last: UavState | None = None  # latest airframe state, for generators that start from it

    def state(self) -> dict:
        return {"route_next": self.route_next, "alt_override": self.alt_override,
                "path": None if self.path is None else {"name": self.path.name, "index": self.path.index,
                                                         "points": self.path.points}}

    def handle(self, kind: str, args: tuple = (), data: Any = None) -> list[Command]:
        if kind in ("follow-route", "resume-route"):
            self.alt_override = None
            self.path = ActivePath("route", self.route, min(self.route_next, len(self.route)))
        elif kind == "fly-path":
            name = str(args[0]) if args else "path"
            pts = list((data or {}).get("waypoints") or [])
            self.alt_override = None
            self.path = ActivePath(name, pts)
        elif kind == "fly-baseline":
            if self.baseline_fn is None:
                raise RuntimeError("no baseline generator configured")
            self.alt_override = None
            self.path = ActivePath("baseline", self.baseline_fn(data or {}, self))
        elif kind == "set-altitude":
            self.alt_override = float(args[0])
            return [Command("set-altitude", {"alt": self.alt_override})]
        else:
            raise ValueError(f"unknown flight command {kind!r}")
        return self.active_commands()

    def current(self) -> dict | None:
        if self.path is None or self.path.index >= len(self.path.points):
            return None
        return self.path.points[self.path.index]

    def active_commands(self) -> list[Command]:
        wp = self.current()
        return [] if wp is None else [Command("goto-waypoint", {"position": wp["position"]})]

    def target(self) -> tuple[Position | None, float | None]:
        wp = self.current()
        if wp is None:
            return None, self.alt_override
        pos = Position.from_dict(wp["position"])
        return pos, self.alt_override if self.alt_override is not None else pos.alt

    def next_route_waypoint(self) -> dict | None:
        return self.route[self.route_next] if self.route_next < len(self.route) else None

    def on_position(self, u: UavState) -> list[tuple[str, dict]]:
        self.last = u
        events = []
        while True:
            wp = self.current()
            if wp is None or u.position.distance_2d(Position.from_dict(wp["position"])) > self.limits.capture_radius:
                return events
            p = self.path
            events.append(("sim.waypoint", {"path": p.name, "index": p.index, "kind": wp.get("kind"),
                                            "tick": u.tick}))
            if p.name == "route":
                self.route_next = p.index + 1
            p.index += 1
            if p.index >= len(p.points):
                events.append(("sim.path", {"path": p.name, "tick": u.tick}))
                self.path = None
                return events


@dataclass
class Simulator:
    world: WorldTruth
    uav: UavState
    controller: FlightController
    limits: Limits = Limits()
    sensor: SensorModel = SensorModel()
    dt: float = 0.5
    tick: int = 0
    odometer: float = 0.0
    seen: set = field(default_factory=set)
    inside: set = field(default_factory=set)
    sweep_index: int = 0
    trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        self.controller.last = self.uav

    @property
    def sector(self) -> str:
        return SWEEP[self.sweep_index % len(SWEEP)]

    def command(self, kind: str, args: tuple = (), data: Any = None) -> list[Command]:
        return self.controller.handle(kind, args, data)

    def telemetry(self, sector: str | None = None) -> dict:
        tel = self.uav.to_dict()
        tel["sector"] = sector
        tel["odometer"] = self.odometer
        nxt = self.controller.next_route_waypoint()
        tel["next_route"] = None if nxt is None else nxt["position"]
        return tel

    def run_tick(self) -> list[tuple[str, dict]]:
        """Advance one ``dt``; return ``(topic, payload)`` events in emission order."""
        target, alt = self.controller.target()
        self.uav = step_kinematics(self.uav, target, self.dt, self.limits, alt)
        self.tick = self.uav.tick
        self.odometer += self.uav.speed * self.dt
        sector = self.sector
        self.sweep_index += 1
        events: list[tuple[str, dict]] = [("sim.telemetry", self.telemetry(sector))]
        for det in sense(self.uav, self.world, sector, self.sensor):
            if det.entity not in self.seen:
                self.seen.add(det.entity)
                events.append(("sim.detection", det.to_dict()))
        for z in self.world.threats:
            now_in = self.uav.position.distance_2d(z.center) < z.radius
            if now_in and z.id not in self.inside:
                self.inside.add(z.id)
                events.append(("sim.threat", {"event": "enter", "threat": z.id, "tick": self.tick}))
            elif not now_in and z.id in self.inside:
                self.inside.discard(z.id)
                events.append(("sim.threat", {"event": "exit", "threat": z.id, "tick": self.tick}))
        events.extend(self.controller.on_position(self.uav))
        return events

    def state_dict(self) -> dict:
        return {"tick": self.tick, "uav": self.uav.to_dict(), "odometer": self.odometer,
                "seen": sorted(self.seen), "inside": sorted(self.inside), "sweep": self.sweep_index,
                "controller": self.controller.state()}

    def state_hash(self, extra: Any = None) -> str:
        blob = json.dumps({"sim": self.state_dict(), "extra": extra}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

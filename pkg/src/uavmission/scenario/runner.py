"""End-to-end mission orchestration on the simulator clock.

Per tick: the simulator advances and publishes its events, the bus delivers
them (the knowledge bridge turns them into facts), the coordinator runs one
deliberation cycle, and the bus delivers the resulting commands and
requests.  Every envelope lands in the mission log.

When the coordinator asks the planner for an acquisition path, the
simulator is copied.  After the mission, the copy flies the coverage
baseline so both strategies start from the same state.
"""
from __future__ import annotations

import copy
import shutil
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from ..bdi import Coordinator, IssuedCommand, MissionPackage, load_mission_package
from ..bus import REQUEST, Bus, Deferred, Envelope
from ..geometry import (CellCoord, GridGeoref, Heading, Position, SituationalMap, WaypointKind, nearest_cell,
                        position_to_cell, turn)
from ..knowledge import KnowledgeSnapshot, KnowledgeStore, P
from ..pddl import droneworld_text
from ..planner.problem import goal_from_beliefs, uav_pose
from ..planner.service import SERVICE as DP_SERVICE
from ..planner.service import PlannerService
from ..sim import SECTORS, FlightController, Simulator, UavState
from .config import ScenarioConfig, load_config
from .coverage import Area, avoid_threats, baseline_path, generate_search_path
from .export import export_all
from .metrics import ScoreReport
from .missionlog import MissionLog

SURVEY_SERVICE = "area.survey"
COMMAND_TOPIC = "atc.command"
SIM_TOPICS = ("sim.telemetry", "sim.detection", "sim.threat", "sim.waypoint", "sim.path")


def default_package_dir() -> Path:
    return Path(str(resources.files("uavmission.data").joinpath("mission")))


def default_scenario_path() -> Path:
    return Path(str(resources.files("uavmission.data").joinpath("canonical.yaml")))


class KnowledgeBridge:
    """Turns simulator events into knowledge-store facts and map markers."""

    def __init__(self, ks: KnowledgeStore, inspection_max: float):
        self.ks = ks
        self.inspection_max = inspection_max

    def attach(self, bus: Bus) -> None:
        for topic in SIM_TOPICS:
            bus.subscribe(topic, self.on_event)

    def _mark(self, x: float, y: float, marker: str, tick: int) -> None:
        m = self.ks.map
        if m is None:
            return
        xmin, ymin, xmax, ymax = m.georef.bounds()
        if xmin <= x <= xmax and ymin <= y <= ymax:
            m.mark(position_to_cell(Position(x, y), m.georef), marker, tick)

    def on_event(self, env: Envelope) -> None:
        ks, d, tick = self.ks, env.payload, env.tick
        topic = env.service
        if topic == "sim.telemetry":
            ks.retract(P("uav-at", "?x", "?y", "?alt"))
            ks.retract(P("uav-course", "?c"))
            ks.retract(P("next-route-waypoint", "?x", "?y", "?alt"))
            ks.tell("uav-at", d["x"], d["y"], d["alt"], tick=tick)
            ks.tell("uav-course", d["course"], tick=tick)
            nxt = d.get("next_route")
            if nxt is not None:
                ks.tell("next-route-waypoint", nxt["x"], nxt["y"], nxt["alt"], tick=tick)
            self._scan(d, tick)
        elif topic == "sim.detection":
            pos = d["position"]
            ks.tell(f"detected-{d['kind']}", d["entity"], pos["x"], pos["y"], tick=tick)
            self._mark(pos["x"], pos["y"], d["kind"], tick)
        elif topic == "sim.threat":
            if d["event"] == "enter":
                ks.tell("threat-encounter", d["threat"], tick=tick)
        elif topic == "sim.waypoint":
            ks.tell("waypoint-reached", d["path"], d["index"], tick=tick)
        elif topic == "sim.path":
            ks.tell("path-complete", d["path"], tick=tick)
            if d["path"] == "route":
                ks.tell("route-complete", tick=tick)

    def _scan(self, d: dict, tick: int) -> None:
        """Low passes mark the neighbouring cell in the swept sector as scanned."""
        m = self.ks.map
        if m is None or d.get("sector") is None or d["alt"] > self.inspection_max:
            return
        xmin, ymin, xmax, ymax = m.georef.bounds()
        if not (xmin <= d["x"] <= xmax and ymin <= d["y"] <= ymax):
            return
        cell = position_to_cell(Position(d["x"], d["y"]), m.georef)
        h = Heading.nearest(d["course"])
        h = {"forward": h, "left": turn(h, "left"), "right": turn(h, "right")}[d["sector"]]
        dc, dr = h.delta
        tgt = (cell.col + dc, cell.row + dr)
        if m.georef.contains(tgt):
            m.mark(CellCoord(*tgt), "scanned", tick)


def seed_map(ks: KnowledgeStore, g: GridGeoref) -> SituationalMap:
    """Fresh situational map with every detection so far marked on it."""
    ks.map = SituationalMap(g)
    bridge = KnowledgeBridge(ks, float("-inf"))
    for kind in ("target", "threat"):
        for f in ks.query(P(f"detected-{kind}", "?id", "?x", "?y")):
            bridge._mark(float(f.args[1]), float(f.args[2]), kind, f.tick)
    return ks.map


class SurveyService:
    """``area.survey``: a boustrophedon over the square centred on the first detected target."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg

    def __call__(self, env: Envelope) -> dict:
        p = env.payload
        snap = KnowledgeSnapshot.from_dict(p["snapshot"])
        targets = snap.query(P("detected-target", "?id", "?x", "?y"))
        if not targets:
            raise ValueError("no detected target to centre the survey on")
        _, tx, ty = targets[0].args
        a = p["area"]
        area = Area(Position(float(tx), float(ty)), float(a["side"]), float(a["spacing"]))
        start, _ = uav_pose(snap)
        alt = float(p["altitude"])
        wps = generate_search_path(area.center, area.side, area.spacing, alt, start)
        zones = [(Position(float(f.args[1]), float(f.args[2])), float(p["threat_radius"]))
                 for f in snap.query(P("detected-threat", "?id", "?x", "?y"))]
        pts = avoid_threats([start] + [w.position for w in wps], zones, float(p["margin"]))[1:]
        out = [{"position": Position(q.x, q.y, alt).to_dict(),
                "kind": (WaypointKind.TURNOUT if i == len(pts) - 1 else WaypointKind.SEARCH).value, "index": i}
               for i, q in enumerate(pts)]
        return {"status": "ok", "label": p["label"], "waypoints": out,
                "area": {**area.to_dict(), "entry": start.to_dict()},
                "georef": area.georef(int(a.get("ring", 0))).to_dict()}


def make_baseline_fn(cfg: ScenarioConfig, holder: dict):
    """Flight-controller hook that builds the coverage baseline from the airframe's current state."""

    def baseline(data: dict, ctl: FlightController) -> list[dict]:
        area = Area.from_dict(data["area"])
        entry = Position.from_dict(data["area"]["entry"]) if data["area"].get("entry") else None
        smap = SituationalMap.from_dict(data["map"])
        start = ctl.last.position
        nxt = ctl.next_route_waypoint()
        final = None
        if nxt is not None:
            cx, cy = smap.georef.center(nearest_cell(Position.from_dict(nxt["position"]), smap.georef))
            final = Position(cx, cy)
        res = baseline_path(area, smap, alt=cfg.altitudes.acquisition, start=start, final=final,
                            entry_hint=entry, threat_radius=cfg.baseline.threat_radius,
                            margin=cfg.baseline.standoff_margin, step=cfg.baseline.sample_step)
        holder["last"] = res
        return [w.to_dict() for w in res.waypoints]

    return baseline


@dataclass
class RunResult:
    log: MissionLog
    status: str
    stage: str | None
    report: ScoreReport | None
    dp_requests: int
    fallback: bool
    out_dir: Path | None = None

    @property
    def ok(self) -> bool:
        return self.status == "mission-complete"


class MissionRunner:
    def __init__(self, cfg: ScenarioConfig, package: MissionPackage | None = None, out_dir: str | Path | None = None):
        self.cfg = cfg
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.log = MissionLog()
        self.bus = Bus(log=self._on_envelope)
        self.ks = KnowledgeStore()
        self.package = package or load_mission_package(self._package_path())
        self.package.seed(self.ks)
        self.baseline_holder: dict = {}
        route = [{"position": p.to_dict(), "kind": WaypointKind.ROUTE.value, "index": i}
                 for i, p in enumerate(cfg.route)]
        ctl = FlightController(route, cfg.limits, make_baseline_fn(cfg, self.baseline_holder))
        uav = UavState(cfg.uav_start, cfg.uav_course % 360.0, cfg.limits.speed, 0)
        self.sim = Simulator(cfg.world, uav, ctl, cfg.limits, cfg.sensor, cfg.dt)
        self.bridge = KnowledgeBridge(self.ks, cfg.altitudes.inspection_max)
        self.bridge.attach(self.bus)
        self.bus.subscribe(COMMAND_TOPIC, self._on_command_event)
        self.bus.register(SURVEY_SERVICE, SurveyService(cfg))
        self.planner = PlannerService(sink=self._write_artifact if self.out_dir else None)
        self.bus.register(DP_SERVICE, self._planner_handler())
        self.coordinator = Coordinator(
            self.package, self.ks, self.bus,
            on_command=self._on_command, on_event=self._on_coordinator_event,
            payload_builders={SURVEY_SERVICE: self._survey_payload, DP_SERVICE: self._dp_payload},
            result_hooks={SURVEY_SERVICE: self._survey_result},
            request_timeout=cfg.request_timeout)
        self.stage = "route"
        self.branch: dict | None = None
        self.branch_sim: Simulator | None = None
        self.dp_requests = 0
        self.dp_done_odometer: float | None = None
        self.fallback = False

    def _package_path(self) -> Path:
        if self.cfg.package is None:
            return default_package_dir()
        p = Path(self.cfg.package)
        if not p.is_absolute() and self.cfg.raw.get("_dir"):
            p = Path(self.cfg.raw["_dir"]) / p
        return p

    # ---- wiring
    def _on_envelope(self, env: Envelope) -> None:
        self.log.append(env.tick, "bus", env.to_dict())
        if env.kind == REQUEST and env.service == DP_SERVICE:
            self.dp_requests += 1
            self.stage = "planning"
            if self.branch_sim is None:
                self._take_branch()

    def _take_branch(self) -> None:
        extra = self.ks.map.to_dict() if self.ks.map is not None else None
        self.branch_sim = copy.deepcopy(self.sim)
        self.branch = {"tick": self.sim.tick, "odometer": self.sim.odometer, "map": extra,
                       "state_hash": self.sim.state_hash(extra)}

    def _planner_handler(self):
        latency = self.cfg.dp_latency

        def handle(env: Envelope):
            out = self.planner(env)
            return Deferred(out, latency) if latency > 0 else out

        return handle

    def _write_artifact(self, name: str, text: str) -> None:
        d = self.out_dir / "pddl"
        d.mkdir(parents=True, exist_ok=True)
        (d / name).write_text(text, encoding="utf-8")

    def _on_command(self, cmd: IssuedCommand) -> None:
        if cmd.kind == "fly-baseline":
            self.fallback = True
            self.stage = "baseline"
        elif cmd.kind == "fly-path" and cmd.args and cmd.args[0] == "acquisition":
            self.stage = "acquisition"
        elif cmd.kind == "resume-route":
            self.stage = "return"
        self.bus.publish(COMMAND_TOPIC, cmd.to_dict(), sender=self.coordinator.name)

    def _on_command_event(self, env: Envelope) -> None:
        d = env.payload
        self.sim.command(d["kind"], tuple(d["args"]), d.get("data"))

    def _on_coordinator_event(self, kind: str, payload: dict) -> None:
        if payload.get("plan") == "SearchAndAcquisition" and payload.get("reason") == "adopted":
            self.stage = "survey"
        self.log.append(self.bus.tick, kind, payload)

    def _survey_payload(self, label: str, coord: Coordinator, it) -> dict:
        a = self.cfg.area
        return {"label": label, "snapshot": self.ks.snapshot().to_dict(),
                "area": {"side": a.side, "spacing": a.spacing, "ring": a.ring},
                "altitude": self.cfg.altitudes.survey, "threat_radius": self.cfg.baseline.threat_radius,
                "margin": self.cfg.baseline.standoff_margin}

    def _survey_result(self, label: str, result: dict, coord: Coordinator) -> None:
        seed_map(self.ks, GridGeoref.from_dict(result["georef"]))

    def _dp_payload(self, label: str, coord: Coordinator, it) -> dict:
        snap = self.ks.snapshot()
        g = self.ks.map.georef
        goal = goal_from_beliefs(snap, g, self.cfg.altitudes.acquisition)
        return {"label": label, "snapshot": snap.to_dict(), "goal": goal.to_dict(), "georef": g.to_dict(),
                "solver": self.cfg.solver.to_dict()}

    # ---- main loop
    def _publish(self, events) -> None:
        for topic, payload in events:
            self.bus.publish(topic, payload, sender="sim")
            if topic == "sim.path" and payload["path"] in ("acquisition", "baseline") and self.dp_done_odometer is None:
                self.dp_done_odometer = self.sim.odometer

    def _finished(self) -> bool:
        return self.ks.holds(P("route-complete")) and self.coordinator.active is None

    def run(self) -> RunResult:
        cfg = self.cfg
        self.log.append(0, "scenario", scenario_record(cfg))
        status, failure = "mission-failed", None
        try:
            self._publish([("sim.telemetry", self.sim.telemetry())])
            self.bus.pump()
            self.coordinator.step(0)
            self.bus.pump()
            while not self._finished():
                if self.sim.tick >= cfg.max_ticks:
                    failure = f"tick limit {cfg.max_ticks} reached"
                    break
                events = self.sim.run_tick()
                self.bus.tick = self.sim.tick
                self._publish(events)
                self.bus.pump()
                self.coordinator.step(self.sim.tick)
                self.bus.pump()
            else:
                status = "mission-complete"
        except Exception as exc:  # any stage failure closes the log as failed
            failure = f"{type(exc).__name__}: {exc}"
        tick = self.bus.tick
        self.log.append(tick, "distance", {"odometer": self.sim.odometer, "ticks": self.sim.tick})
        report = None
        if status == "mission-complete" and self.branch_sim is not None:
            try:
                report = self._score(tick)
            except Exception as exc:
                status, failure = "mission-failed", f"baseline: {type(exc).__name__}: {exc}"
                self.stage = "baseline-replay"
        closing = {"stage": None if status == "mission-complete" else self.stage,
                   "dp_requests": self.dp_requests, "fallback": self.fallback,
                   "score": None if report is None else report.to_dict()}
        if failure:
            closing["error"] = failure
        self.log.append(tick, status, closing)
        result = RunResult(self.log, status, closing["stage"], report, self.dp_requests, self.fallback, self.out_dir)
        if self.out_dir is not None:
            write_run_dir(self.out_dir, cfg, self.log)
        return result

    def _score(self, tick: int) -> ScoreReport:
        b = copy.deepcopy(self.branch_sim)
        replay_hash = b.state_hash(self.branch["map"])
        if replay_hash != self.branch["state_hash"]:
            raise RuntimeError("baseline branch does not match the planning branch state")
        self.log.append(tick, "branch", {"tick": self.branch["tick"], "odometer": self.branch["odometer"],
                                         "state_hash": self.branch["state_hash"], "replay_hash": replay_hash})
        survey = self.ks.artifacts.get("search") or {}
        b.command("fly-baseline", ("search",), {"area": survey.get("area"), "map": self.branch["map"]})
        res = self.baseline_holder["last"]
        start_odo = b.odometer
        encounters = 0
        done = False
        while b.tick < self.cfg.max_ticks + self.branch["tick"]:
            for topic, payload in b.run_tick():
                if topic == "sim.threat" and payload["event"] == "enter":
                    encounters += 1
                if topic == "sim.path" and payload["path"] == "baseline":
                    done = True
            if done:
                break
        if not done:
            raise RuntimeError("baseline replay did not finish")
        d_base = b.odometer - start_odo
        self.log.append(tick, "baseline", {
            "waypoints": [w.to_dict() for w in res.waypoints], "planned_length": res.length,
            "complete": res.complete, "d_baseline": d_base, "ticks": b.tick - self.branch["tick"],
            "threat_encounters": encounters})
        if self.dp_done_odometer is None:
            d_dp = d_base
        else:
            # with a fallback this is the baseline flown by the mission itself
            d_dp = self.dp_done_odometer - self.branch["odometer"]
        report = ScoreReport.from_distances(d_base, d_dp)
        self.log.append(tick, "score", {**report.to_dict(), "formula": report.formula()})
        return report


def scenario_record(cfg: ScenarioConfig) -> dict:
    return {
        "name": cfg.name, "seed": cfg.seed, "anchor": {"lat": cfg.anchor[0], "lon": cfg.anchor[1]},
        "route": [p.to_dict() for p in cfg.route],
        "uav": {"position": cfg.uav_start.to_dict(), "course": cfg.uav_course},
        "targets": [{"id": t.id, "position": t.position.to_dict()} for t in cfg.world.targets],
        "threats": [{"id": z.id, "position": z.center.to_dict(), "radius": z.radius} for z in cfg.world.threats],
        "area": {"side": cfg.area.side, "spacing": cfg.area.spacing, "ring": cfg.area.ring},
        "sensor": {"range": cfg.sensor.range, "sector_width": cfg.sensor.sector_width,
                   "sectors": sorted(SECTORS)},
        "dt": cfg.dt,
    }


def write_run_dir(out: Path, cfg: ScenarioConfig, log: MissionLog) -> None:
    """Run directory: scenario copy, mission log, planner artifacts and exports."""
    out.mkdir(parents=True, exist_ok=True)
    src = cfg.raw.get("_source")
    if src and Path(src).exists():
        shutil.copyfile(src, out / "scenario.yaml")
    else:
        raw = {k: v for k, v in cfg.raw.items() if not k.startswith("_")}
        (out / "scenario.yaml").write_text(yaml.safe_dump(raw, sort_keys=True), encoding="utf-8")
    (out / "pddl").mkdir(exist_ok=True)
    (out / "pddl" / "domain.pddl").write_text(droneworld_text(), encoding="utf-8")
    log.write(out / "mission_log.jsonl")
    export_all(log, out / "exports")


def run_scenario(cfg: ScenarioConfig | str | Path, out_dir: str | Path | None = None, *,
                 seed: int | None = None, package: MissionPackage | None = None) -> RunResult:
    if not isinstance(cfg, ScenarioConfig):
        cfg = load_config(cfg, seed)
    elif seed is not None:
        cfg = cfg.with_seed(seed)
    return MissionRunner(cfg, package, out_dir).run()


__all__ = ["KnowledgeBridge", "MissionRunner", "RunResult", "SurveyService", "default_package_dir",
           "default_scenario_path", "run_scenario", "scenario_record", "seed_map", "write_run_dir"]

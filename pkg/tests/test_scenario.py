import json
import math
import random

import pytest
import yaml

from uavmission.geometry import CellCoord, Position, SituationalMap, WaypointKind, path_length
from uavmission.scenario import (Area, ConfigError, CoverageError, ExportError, LogError, MissionLog, ScoreError,
                                 ScoreReport, audit_planner_traffic, avoid_threats, baseline_path,
                                 config_from_dict, default_scenario_path, export, generate_search_path,
                                 load_config, score, swath_coverage)
from uavmission.scenario.coverage import merge_zones

AREA = Area(Position(4200, 400), 3000, 600)


# ---- coverage geometry

@pytest.mark.parametrize("start", [Position(0, 0), Position(9000, 9000), Position(9000, -9000),
                                   Position(-1, 5000), None])
def test_search_path_shape(start):
    wps = generate_search_path(AREA.center, AREA.side, AREA.spacing, 120, start)
    assert len(wps) == 5 * 5 + 1
    assert [w.index for w in wps] == list(range(26))
    assert wps[-1].kind is WaypointKind.TURNOUT
    assert not AREA.contains(wps[-1].position)
    assert all(AREA.contains(w.position, strict=True) for w in wps[:-1])
    xs = sorted({w.position.x for w in wps[:-1]})
    assert [b - a for a, b in zip(xs, xs[1:])] == [600.0] * 4
    # the survey starts at the corner nearest the UAV
    if start is not None:
        corners = [Position(x, y) for x in (2700, 5700) for y in (-1100, 1900)]
        nearest = min(corners, key=start.distance_2d)
        assert start.distance_2d(wps[0].position) == pytest.approx(
            min(start.distance_2d(c) for c in [Position(3000, -800), Position(3000, 1600),
                                                 Position(5400, -800), Position(5400, 1600)]))
        assert wps[0].position.distance_2d(nearest) == pytest.approx(300 * math.sqrt(2))


def test_single_track_when_spacing_equals_side():
    wps = generate_search_path(Position(0, 0), 600, 600, 100)
    assert [(w.position.x, w.position.y) for w in wps] == [(0.0, 0.0), (0.0, 600.0)]
    assert wps[-1].kind is WaypointKind.TURNOUT


def test_bad_geometry():
    with pytest.raises(CoverageError):
        generate_search_path(Position(0, 0), 100, 200)
    with pytest.raises(CoverageError):
        generate_search_path(Position(0, 0), 100, 0)


def _cells_touched_by_swath(wps, area, half):
    """Independent cell-level check: every spacing x spacing cell overlaps some leg's swept rectangle."""
    n = area.n_tracks
    x0, y0, _, _ = area.bounds
    hit = set()
    for a, b in zip(wps, wps[1:]):
        a, b = a.position, b.position
        lo_x, hi_x = min(a.x, b.x) - half, max(a.x, b.x) + half
        lo_y, hi_y = min(a.y, b.y) - half, max(a.y, b.y) + half
        for i in range(n):
            for j in range(n):
                cx0, cy0 = x0 + i * area.spacing, y0 + j * area.spacing
                if cx0 < hi_x and cx0 + area.spacing > lo_x and cy0 < hi_y and cy0 + area.spacing > lo_y:
                    hit.add((i, j))
    return hit


def test_swath_covers_the_whole_square():
    wps = generate_search_path(AREA.center, AREA.side, AREA.spacing, 120, Position(0, 0))
    assert swath_coverage(wps, AREA, 300.0) == 1.0
    assert _cells_touched_by_swath(wps, AREA, 300.0) == {(i, j) for i in range(5) for j in range(5)}
    assert swath_coverage(wps, AREA, 250.0) < 1.0


def test_zone_merging():
    a, b = (Position(0, 0), 100.0), (Position(150, 0), 100.0)
    (c, r), = merge_zones([a, b])
    assert r == pytest.approx(175.0)
    assert (c.x, c.y) == pytest.approx((75.0, 0.0))
    inner = (Position(10, 0), 20.0)
    assert merge_zones([a, inner]) == [a]
    apart = [(Position(0, 0), 10.0), (Position(100, 0), 10.0)]
    assert merge_zones(apart) == apart


def _min_clearance(pts, c):
    best = float("inf")
    for a, b in zip(pts, pts[1:]):
        L = a.distance_2d(b)
        t = 0 if L == 0 else max(0.0, min(1.0, ((c.x - a.x) * (b.x - a.x) + (c.y - a.y) * (b.y - a.y)) / L ** 2))
        best = min(best, math.hypot(c.x - (a.x + t * (b.x - a.x)), c.y - (a.y + t * (b.y - a.y))))
    return best


def test_detour_keeps_standoff():
    rng = random.Random(1)
    for _ in range(100):
        c = Position(rng.uniform(-300, 300), rng.uniform(-300, 300))
        pts = avoid_threats([Position(-2000, 0), Position(2000, 0)], [(c, 200.0)], 100.0)
        assert _min_clearance(pts, c) >= 300.0 - 1e-6
        assert pts[0] == Position(-2000, 0) and pts[-1].distance_2d(Position(2000, 0)) < 1e-9


def test_detour_geometry_is_a_rectangle_around_the_chord():
    pts = avoid_threats([Position(0, 0), Position(2000, 0)], [(Position(1000, 100), 300.0)], 200.0)
    half = math.sqrt(500 ** 2 - 100 ** 2)
    assert [(round(p.x, 6), round(p.y, 6)) for p in pts] == [
        (0, 0), (round(1000 - half, 6), 0), (round(1000 - half, 6), -500), (round(1000 + half, 6), -500),
        (round(1000 + half, 6), 0), (2000, 0)]


def test_legs_clear_of_threats_are_untouched():
    pts = [Position(0, 0), Position(1000, 0), Position(1000, 1000)]
    assert avoid_threats(pts, [(Position(5000, 5000), 400.0)], 200.0) == pts


def _map():
    g = AREA.georef(ring=1)
    return SituationalMap(g)


def test_baseline_cut_when_target_comes_into_view():
    m = _map()
    g = m.georef
    m.mark(CellCoord(3, 3), "target", 1)
    res = baseline_path(AREA, m, alt=60, start=Position(3000, -2000), threats=[])
    assert res.complete
    assert res.waypoints[-1].kind is WaypointKind.GOAL
    assert res.length == pytest.approx(path_length([Position(3000, -2000)] + [w.position for w in res.waypoints]))
    full = baseline_path(AREA, _map(), alt=60, start=Position(3000, -2000), threats=[])
    assert not full.complete
    assert res.length < full.length
    assert g.cols == 7


def test_baseline_without_target_flies_everything():
    res = baseline_path(AREA, _map(), alt=60, start=Position(0, 0), threats=[])
    cover = generate_search_path(AREA.center, AREA.side, AREA.spacing, 60, Position(0, 0))[:-1]
    assert [w.position for w in res.waypoints] == [w.position for w in cover]
    assert not res.complete


def test_baseline_detours_around_known_threats():
    threat = Position(3600, -200)
    res = baseline_path(AREA, _map(), alt=60, start=Position(0, 0), threats=[threat], threat_radius=400,
                        margin=200)
    assert _min_clearance([Position(0, 0)] + [w.position for w in res.waypoints], threat) >= 600 - 1e-6


# ---- metrics

def test_score_examples():
    assert score(4000, 1000) == 75.0
    assert score(5000, 5000) == 0.0
    assert score(1000, 1500) == -50.0
    for bad in [(0, 1), (-5, 1), (10, -1)]:
        with pytest.raises(ScoreError):
            score(*bad)


def test_score_report_formula_lists_inputs():
    r = ScoreReport.from_distances(11460.0, 4130.0)
    text = r.formula()
    assert "11460.000" in text and "4130.000" in text and f"{r.score:.3f}%" in text


# ---- log

def test_log_round_trip_and_closing():
    log = MissionLog()
    log.append(0, "scenario", {"name": "x", "seed": 1})
    log.append(3, "note", {"v": 1.5})
    with pytest.raises(LogError):
        log.append(2, "note")
    assert not log.closed
    log.append(3, "mission-failed", {"stage": "route"})
    assert log.closed
    with pytest.raises(LogError):
        log.append(4, "note")
    again = MissionLog.loads(log.dumps())
    assert again.dumps() == log.dumps()
    with pytest.raises(LogError):
        MissionLog.loads('{"tick": 1}\n')


def test_exports_require_a_closed_log():
    log = MissionLog()
    log.append(0, "scenario", {"name": "x", "seed": 0, "route": []})
    with pytest.raises(ExportError):
        export(log, "summary")
    log.append(0, "mission-complete", {})
    with pytest.raises(ExportError):
        export(log, "pdf")


# ---- config

def test_config_errors(canonical_raw):
    for mutate in (lambda d: d["area"].update(spacing=4000),
                   lambda d: d["area"].update(ring=-1),
                   lambda d: d["altitudes"].update(survey=-5),
                   lambda d: d["limits"].update(speed=100),
                   lambda d: d["sensor"].update(lateral_cover=100),
                   lambda d: d.update(world="nope"),
                   lambda d: d["world"]["threats"][0].update(radius=0)):
        d = json.loads(json.dumps(canonical_raw))
        mutate(d)
        with pytest.raises(ConfigError):
            config_from_dict(d)


def test_seed_jitter_is_reproducible(canonical_raw):
    d = {**canonical_raw, "jitter": 100.0, "seed": 4}
    a, b = config_from_dict(d), config_from_dict(dict(d))
    assert a.world == b.world
    assert config_from_dict({**d, "seed": 5}).world != a.world


def test_load_config_rejects_non_mapping(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(p)


# ---- whole missions

def test_canonical_mission(canonical_run):
    r = canonical_run
    assert r.status == "mission-complete"
    assert r.dp_requests == 1 and not r.fallback
    assert r.report is not None and r.report.score > 0
    kinds = [rec.kind for rec in r.log.records]
    assert kinds[0] == "scenario" and kinds[-1] == "mission-complete"
    ticks = [rec.tick for rec in r.log.records]
    assert ticks == sorted(ticks)
    branch = r.log.first("branch").payload
    assert branch["state_hash"] == branch["replay_hash"]
    audits = audit_planner_traffic(r.log)
    assert len(audits) == 1 and audits[0].ok and audits[0].status == "solved"


def test_canonical_plan_avoids_threat_cells(canonical_run):
    resp = canonical_run.log.envelopes("dp.solve", "response")[0]["payload"]
    problem = audit_planner_traffic(canonical_run.log)[0].problem
    threats = {line.split()[1].rstrip(")") for line in problem.splitlines() if line.strip().startswith("(threat ")}
    entered = {s.strip("()").split()[2] for s in resp["plan"] if s.startswith("(move")}
    assert threats and not (entered & threats)


def test_canonical_run_directory(canonical_run):
    out = canonical_run.out_dir
    names = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()}
    assert {"scenario.yaml", "mission_log.jsonl", "pddl/domain.pddl", "pddl/acquisition.problem.pddl",
            "pddl/acquisition.plan", "exports/trajectory.csv", "exports/paths.geojson",
            "exports/summary.json"} <= names
    assert MissionLog.read(out / "mission_log.jsonl").dumps() == canonical_run.log.dumps()
    summary = json.loads((out / "exports" / "summary.json").read_text())
    assert summary["score"]["score"] == pytest.approx(canonical_run.report.score, abs=1e-9)
    geo = json.loads((out / "exports" / "paths.geojson").read_text())
    names = {f["properties"].get("name") for f in geo["features"]}
    assert {"route", "search", "acquisition"} <= names
    rows = (out / "exports" / "trajectory.csv").read_text().splitlines()
    assert rows[0] == "tick,x,y,alt,course" and len(rows) > 1000
    assert yaml.safe_load((out / "scenario.yaml").read_text())["name"] == "canonical"


def test_mission_without_threats_never_plans(variant):
    r = variant(lambda d: d["world"].update(threats=[]))
    assert r.status == "mission-complete" and r.dp_requests == 0 and r.report is None


def test_empty_world_flies_the_route(variant):
    r = variant(lambda d: d["world"].update(targets=[], threats=[]))
    assert r.status == "mission-complete"
    wps = [e["payload"]["index"] for e in r.log.envelopes("sim.waypoint") if e["payload"]["path"] == "route"]
    assert wps == [0, 1]


def test_unsolvable_acquisition_falls_back_to_coverage(variant):
    def boxed(d):
        d["world"]["threats"] = [{"id": f"b{i}", "x": 4200 + dx, "y": 400 + dy, "radius": 250}
                                 for i, (dx, dy) in enumerate([(600, 0), (-600, 0), (0, 600), (0, -600)])]

    r = variant(boxed)
    assert r.status == "mission-complete"
    assert r.fallback and r.report.score == 0.0
    resp = r.log.envelopes("dp.solve", "response")[0]["payload"]
    assert resp["status"] == "unsolvable"


def test_default_scenario_path_exists():
    assert default_scenario_path().exists()

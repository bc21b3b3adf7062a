"""Exports derived from a closed mission log."""
from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

from .metrics import ScoreReport
from .missionlog import MissionLog

FORMATS = ("trajectory-csv", "geojson", "summary")
FILENAMES = {"trajectory-csv": "trajectory.csv", "geojson": "paths.geojson", "summary": "summary.json"}
METERS_PER_DEG = 111_320.0


class ExportError(ValueError):
    pass


def _require_closed(log: MissionLog) -> None:
    if not log.closed:
        raise ExportError("mission log is not closed by a mission-complete or mission-failed record")


def trajectory_csv(log: MissionLog) -> str:
    _require_closed(log)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tick", "x", "y", "alt", "course"])
    for env in log.envelopes("sim.telemetry", "event"):
        d = env["payload"]
        w.writerow([d["tick"], repr(d["x"]), repr(d["y"]), repr(d["alt"]), repr(d["course"])])
    return buf.getvalue()


def to_lonlat(x: float, y: float, anchor: dict) -> list[float]:
    lat0, lon0 = float(anchor.get("lat", 0.0)), float(anchor.get("lon", 0.0))
    lat = lat0 + y / METERS_PER_DEG
    lon = lon0 + x / (METERS_PER_DEG * math.cos(math.radians(lat0)))
    return [lon, lat]


def _response(log: MissionLog, service: str) -> dict | None:
    for env in log.envelopes(service, "response"):
        if isinstance(env["payload"], dict) and "error" not in env["payload"]:
            return env["payload"]
    return None


def _scenario(log: MissionLog) -> dict:
    rec = log.first("scenario")
    if rec is None:
        raise ExportError("mission log has no scenario record")
    return rec.payload


def paths(log: MissionLog) -> dict[str, list[dict]]:
    """Named paths as lists of position dicts: route, search and acquisition when present."""
    sc = _scenario(log)
    out = {"route": list(sc["route"])}
    for name, service in (("search", "area.survey"), ("acquisition", "dp.solve")):
        resp = _response(log, service)
        if resp and resp.get("waypoints"):
            out[name] = [w["position"] for w in resp["waypoints"]]
    return out


def geojson(log: MissionLog) -> dict:
    _require_closed(log)
    sc = _scenario(log)
    anchor = sc.get("anchor", {})
    feats = []
    for name, pts in paths(log).items():
        feats.append({"type": "Feature", "properties": {"kind": "path", "name": name, "points": len(pts)},
                      "geometry": {"type": "LineString",
                                   "coordinates": [to_lonlat(p["x"], p["y"], anchor) for p in pts]}})
    for kind in ("targets", "threats"):
        for e in sc.get(kind, []):
            props = {"kind": kind[:-1], "id": e["id"]}
            if "radius" in e:
                props["radius"] = e["radius"]
            p = e["position"]
            feats.append({"type": "Feature", "properties": props,
                          "geometry": {"type": "Point", "coordinates": to_lonlat(p["x"], p["y"], anchor)}})
    return {"type": "FeatureCollection", "features": feats}


def summary(log: MissionLog) -> dict:
    _require_closed(log)
    sc = _scenario(log)
    end = log.records[-1]
    out = {"scenario": sc["name"], "seed": sc["seed"], "status": end.kind, "stage": end.payload.get("stage"),
           "dp_requests": end.payload.get("dp_requests"), "fallback": end.payload.get("fallback"),
           "score": None, "solver": None, "baseline": None}
    dist = log.first("distance")
    if dist is not None:
        out["distance"] = dist.payload
    rec = log.first("score")
    if rec is not None:
        d_base, d_dp = rec.payload["d_baseline"], rec.payload["d_dp"]
        report = ScoreReport.from_distances(d_base, d_dp)
        out["score"] = {"d_baseline": d_base, "d_dp": d_dp, "score": report.score, "formula": report.formula()}
    resp = None
    for env in log.envelopes("dp.solve", "response"):
        resp = env["payload"]
    if resp is not None:
        out["solver"] = {k: resp.get(k) for k in ("status", "cost", "stats", "problem_sha256")}
        out["solver"]["plan_length"] = len(resp.get("plan") or [])
        if "error" in resp:
            out["solver"]["error"] = resp["error"]
    base = log.first("baseline")
    if base is not None:
        out["baseline"] = {k: base.payload[k] for k in ("d_baseline", "complete", "planned_length",
                                                         "threat_encounters")}
    return out


def export(log: MissionLog, fmt: str) -> str:
    if fmt == "trajectory-csv":
        return trajectory_csv(log)
    if fmt == "geojson":
        return json.dumps(geojson(log), indent=1, sort_keys=True) + "\n"
    if fmt == "summary":
        return json.dumps(summary(log), indent=2, sort_keys=True) + "\n"
    raise ExportError(f"unknown export format {fmt!r}; choose from {', '.join(FORMATS)}")


def export_all(log: MissionLog, out_dir: str | Path) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for fmt in FORMATS:
        path = out_dir / FILENAMES[fmt]
        path.write_text(export(log, fmt), encoding="utf-8")
        written[fmt] = path
    return written

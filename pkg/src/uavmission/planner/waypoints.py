from __future__ import annotations

from ..geometry import GridGeoref, Waypoint, WaypointKind, cell_to_waypoint, parse_cell_name
from ..pddl import Plan

MOVES = frozenset({"move-forward", "move-left", "move-right"})
SCANS = {"scan-forward": "forward", "scan-left": "left", "scan-right": "right"}


class PlanTranslationError(ValueError):
    pass


def _split(step: str) -> tuple[str, list[str]]:
    parts = step.strip("()").split()
    return parts[0], parts[1:]


def start_gimbal(plan: Plan) -> tuple[str, ...]:
    """Sectors scanned before the first move."""
    out = []
    for step in plan.steps:
        name, _ = _split(step)
        if name in MOVES:
            break
        if name in SCANS:
            out.append(SCANS[name])
    return tuple(out)


def plan_to_waypoints(plan: Plan, g: GridGeoref, alt: float) -> list[Waypoint]:
    """One waypoint per move at the entered cell; scans annotate the waypoint they happen at."""
    wps: list[Waypoint] = []
    for step in plan.steps:
        name, args = _split(step)
        if name in MOVES:
            wps.append(cell_to_waypoint(parse_cell_name(args[1]), g, alt, WaypointKind.ACQUISITION, len(wps)))
        elif name in SCANS:
            if wps:
                last = wps[-1]
                wps[-1] = Waypoint(last.position, last.kind, last.index, last.gimbal + (SCANS[name],))
        elif name != "acquire":
            raise PlanTranslationError(f"unknown action {name!r} in plan")
    if wps:
        last = wps[-1]
        wps[-1] = Waypoint(last.position, WaypointKind.GOAL, last.index, last.gimbal)
    return wps

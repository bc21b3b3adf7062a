"""Turn the agent's beliefs into a DroneWorld-Scan problem instance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..geometry import (CellCoord, GridGeoref, Heading, Position, SituationalMap, nearest_cell,
                        position_to_cell, turn)
from ..knowledge import KnowledgeSnapshot, P
from ..pddl import Atom, Literal, Problem, format_problem

DIRS = (Heading.N, Heading.E, Heading.S, Heading.W)


class IncompleteSnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class GoalSpec:
    targets: tuple[CellCoord, ...]
    final: CellCoord
    altitude: float = 60.0

    def to_dict(self) -> dict:
        return {"targets": [c.to_list() for c in self.targets], "final": self.final.to_list(),
                "altitude": self.altitude}

    @classmethod
    def from_dict(cls, d: dict) -> "GoalSpec":
        return cls(tuple(CellCoord(*c) for c in d["targets"]), CellCoord(*d["final"]), float(d["altitude"]))


def grid_problem(cols: int, rows: int, start: CellCoord, heading: Heading, *,
                 threats: Iterable[CellCoord] = (), targets: Iterable[CellCoord] = (),
                 scanned: Iterable[CellCoord] = (), goal_targets: Iterable[CellCoord] | None = None,
                 final: CellCoord | None = None, name: str = "grid") -> Problem:
    """Problem over a ``cols`` x ``rows`` grid with cells named ``c<col>_<row>``."""
    targets = sorted(set(targets))
    goal_targets = targets if goal_targets is None else sorted(set(goal_targets))
    objects = tuple((f"c{c}_{r}", "cell") for r in range(rows) for c in range(cols))
    init: set[Atom] = {Atom("at", (start.name(),)), Atom("heading", (heading.symbol,))}
    for r in range(rows):
        for c in range(cols):
            for h in DIRS:
                dc, dr = h.delta
                if 0 <= c + dc < cols and 0 <= r + dr < rows:
                    init.add(Atom("adjacent", (f"c{c}_{r}", f"c{c + dc}_{r + dr}", h.symbol)))
    for h in DIRS:
        init.add(Atom("left-of", (h.symbol, turn(h, "left").symbol)))
        init.add(Atom("right-of", (h.symbol, turn(h, "right").symbol)))
    init.update(Atom("threat", (c.name(),)) for c in threats)
    init.update(Atom("target", (c.name(),)) for c in set(targets) | set(goal_targets))
    init.update(Atom("scanned", (c.name(),)) for c in scanned)
    goal = [Literal(Atom("acquired", (t.name(),))) for t in goal_targets]
    if final is not None:
        goal.append(Literal(Atom("at", (final.name(),))))
    return Problem(name, "droneworld-scan", objects, frozenset(init), tuple(goal))


def uav_pose(snap: KnowledgeSnapshot) -> tuple[Position, float]:
    at = snap.query(P("uav-at", "?x", "?y", "?alt"))
    course = snap.query(P("uav-course", "?c"))
    if not at or not course:
        raise IncompleteSnapshotError("snapshot lacks uav-at/uav-course telemetry")
    x, y, alt = at[-1].args
    return Position(float(x), float(y), float(alt)), float(course[-1].args[0])


def make_problem(snap: KnowledgeSnapshot, goal: GoalSpec, g: GridGeoref) -> Problem:
    smap = snap.situational_map or SituationalMap(g)
    if smap.georef != g:
        raise ValueError("snapshot situational map uses a different georef")
    pos, course = uav_pose(snap)
    start = position_to_cell(pos, g)
    return grid_problem(g.cols, g.rows, start, Heading.nearest(course),
                        threats=smap.cells_with("threat"), targets=smap.cells_with("target"),
                        scanned=smap.cells_with("scanned"), goal_targets=goal.targets,
                        final=goal.final, name=f"acquisition-t{snap.tick}")


def build_problem(snap: KnowledgeSnapshot, goal: GoalSpec, g: GridGeoref) -> tuple[str, GridGeoref]:
    return format_problem(make_problem(snap, goal, g)), g


def goal_from_beliefs(snap: KnowledgeSnapshot, g: GridGeoref, altitude: float) -> GoalSpec:
    """Targets from the situational map, final cell nearest the next original-route waypoint."""
    smap = snap.situational_map
    targets = tuple(smap.cells_with("target")) if smap else ()
    nxt = snap.query(P("next-route-waypoint", "?x", "?y", "?alt"))
    if nxt:
        x, y, _ = nxt[-1].args
        final = nearest_cell(Position(float(x), float(y)), g)
    else:
        final = position_to_cell(uav_pose(snap)[0], g)
    return GoalSpec(targets, final, altitude)

"""Survey geometry: boustrophedon coverage, threat detours and the coverage baseline."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..geometry import (CellCoord, GridGeoref, Heading, Position, SituationalMap, Waypoint, WaypointKind,
                        path_length, position_to_cell, reindex, turn)


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class Area:
    """Axis-aligned square survey area."""

    center: Position
    side: float
    spacing: float

    @property
    def n_tracks(self) -> int:
        return max(1, math.ceil(self.side / self.spacing - 1e-9))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        h = self.side / 2
        return (self.center.x - h, self.center.y - h, self.center.x + h, self.center.y + h)

    def contains(self, p: Position, strict: bool = False) -> bool:
        x0, y0, x1, y1 = self.bounds
        if strict:
            return x0 < p.x < x1 and y0 < p.y < y1
        return x0 <= p.x <= x1 and y0 <= p.y <= y1

    def track_offsets(self) -> list[float]:
        """Track positions along x, relative to the west edge, centred in their strips."""
        n = self.n_tracks
        strip = self.side / n
        return [strip * (k + 0.5) for k in range(n)]

    def georef(self, ring: int = 0) -> GridGeoref:
        """Planning grid: one cell per ``spacing`` square plus ``ring`` cells of margin."""
        n = self.n_tracks
        x0, y0, _, _ = self.bounds
        strip = self.side / n
        origin = Position(x0 + strip / 2 - ring * strip, y0 + strip / 2 - ring * strip, 0.0)
        return GridGeoref(origin, strip, n + 2 * ring, n + 2 * ring)

    def to_dict(self) -> dict:
        return {"center": self.center.to_dict(), "side": self.side, "spacing": self.spacing}

    @classmethod
    def from_dict(cls, d: dict) -> "Area":
        return cls(Position.from_dict(d["center"]), float(d["side"]), float(d["spacing"]))


def start_corner(area: Area, pos: Position | None) -> tuple[bool, bool]:
    """``(from_east, from_north)`` for the corner nearest ``pos``; ties go south-west."""
    if pos is None:
        return False, False
    return pos.x > area.center.x, pos.y > area.center.y


def generate_search_path(center: Position, side: float, spacing: float, alt: float = 120.0,
                         start: Position | None = None, kind: WaypointKind = WaypointKind.SEARCH) -> list[Waypoint]:
    """Boustrophedon over the square with north-south tracks ``spacing`` apart.

    Waypoints sit every ``spacing`` metres along each track, at the centres of
    the planning cells.  The final waypoint is the turnout: one spacing beyond
    the last track's end, outside the square.
    """
    if spacing <= 0 or side <= 0:
        raise CoverageError("side and spacing must be positive")
    if spacing > side:
        raise CoverageError("spacing exceeds the area side")
    area = Area(center, side, spacing)
    east, north = start_corner(area, start)
    x0, y0, x1, y1 = area.bounds
    n = area.n_tracks
    strip = side / n
    xs = [x0 + o for o in area.track_offsets()]
    if east:
        xs.reverse()
    ys = [y0 + strip * (k + 0.5) for k in range(n)]
    going_north = not north
    pts: list[Waypoint] = []
    for x in xs:
        col = ys if going_north else list(reversed(ys))
        pts.extend(Waypoint(Position(x, y, alt), kind, 0) for y in col)
        going_north = not going_north
    last = pts[-1].position
    # after the last track the UAV keeps its heading to the turn point outside the square
    dy = strip if not going_north else -strip
    pts.append(Waypoint(Position(last.x, last.y + dy, alt), WaypointKind.TURNOUT, 0))
    return reindex(pts)


def swath_coverage(waypoints: list[Waypoint], area: Area, lateral_cover: float, resolution: float = 10.0) -> float:
    """Fraction of raster points of the square swept by the sensor footprint along the path.

    The footprint is a square reaching ``lateral_cover`` to each side of the
    UAV and the same distance ahead and behind, so a leg sweeps a rectangle
    ``2 * lateral_cover`` wide extending ``lateral_cover`` past both ends.
    """
    segs = [(a.position, b.position) for a, b in zip(waypoints, waypoints[1:])]
    x0, y0, x1, y1 = area.bounds
    n = int(round(area.side / resolution))
    covered = 0
    total = 0
    for i in range(n + 1):
        x = x0 + i * area.side / n
        for j in range(n + 1):
            y = y0 + j * area.side / n
            total += 1
            p = Position(x, y)
            if any(_swept(p, a, b, lateral_cover + 1e-9) for a, b in segs):
                covered += 1
    return covered / total


def _swept(p: Position, a: Position, b: Position, half: float) -> bool:
    L = a.distance_2d(b)
    if L == 0:
        return abs(p.x - a.x) <= half and abs(p.y - a.y) <= half
    ux, uy = (b.x - a.x) / L, (b.y - a.y) / L
    along = (p.x - a.x) * ux + (p.y - a.y) * uy
    across = -(p.x - a.x) * uy + (p.y - a.y) * ux
    return -half <= along <= L + half and abs(across) <= half


def avoid_threats(points: list[Position], threats: list[tuple[Position, float]], margin: float) -> list[Position]:
    """Insert a rectangular detour wherever a leg passes inside a threat's standoff distance.

    Overlapping standoff circles are first merged (see :func:`merge_zones`).
    Points (other than the first) lying inside a standoff circle are dropped.
    Each offending leg leaves its line where it enters the standoff circle,
    steps ``standoff`` sideways away from the threat (left when the threat is
    dead ahead), runs parallel and rejoins the same line where it leaves the
    circle.
    """
    zones = merge_zones([(c, r + margin) for c, r in threats])
    kept = [p for i, p in enumerate(points) if i == 0 or all(p.distance_2d(c) >= d for c, d in zones)]
    out = kept[:1]
    for a, b in zip(kept, kept[1:]):
        legs = [a, b]
        for c, d in zones:
            legs = _detour(legs, c, d)
        out.extend(legs[1:])
    return out


def merge_zones(zones: list[tuple[Position, float]]) -> list[tuple[Position, float]]:
    """Replace every pair of overlapping circles by one circle enclosing both, until none overlap."""
    out = [(Position(c.x, c.y), float(d)) for c, d in zones]
    merged = True
    while merged:
        merged = False
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                (a, ra), (b, rb) = out[i], out[j]
                gap = a.distance_2d(b)
                if gap >= ra + rb:
                    continue
                if gap + rb <= ra:
                    new = (a, ra)
                elif gap + ra <= rb:
                    new = (b, rb)
                else:
                    r = (gap + ra + rb) / 2
                    t = (r - ra) / gap
                    new = (Position(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t), r)
                out[i] = new
                del out[j]
                merged = True
                break
            if merged:
                break
    return out


def _detour(pts: list[Position], c: Position, d: float) -> list[Position]:
    res = [pts[0]]
    for a, b in zip(pts, pts[1:]):
        L = a.distance_2d(b)
        if L == 0:
            res.append(b)
            continue
        ux, uy = (b.x - a.x) / L, (b.y - a.y) / L
        nx, ny = -uy, ux  # left normal
        s = (c.x - a.x) * ux + (c.y - a.y) * uy
        cn = (c.x - a.x) * nx + (c.y - a.y) * ny
        half = math.sqrt(max(0.0, d * d - cn * cn))  # half-chord of the standoff circle on this line
        if abs(cn) >= d or s + half <= 0 or s - half >= L:
            res.append(b)
            continue
        off = -d if cn > 0 else d  # step away from the threat
        s0, s1 = max(0.0, s - half), min(L, s + half)
        alt = a.alt + (b.alt - a.alt) * 0.5

        def at(t: float, o: float) -> Position:
            return Position(a.x + ux * t + nx * o, a.y + uy * t + ny * o, alt)

        if s0 > 0:
            res.append(at(s0, 0.0))
        res.append(at(s0, off))
        res.append(at(s1, off))
        if s1 < L:
            res.append(at(s1, 0.0))
        res.append(b)
    return res


def sees_cell(g: GridGeoref, cell: CellCoord, heading: Heading, target: CellCoord) -> bool:
    """True when ``target`` is the forward, left or right neighbour of ``cell``."""
    for h in (heading, turn(heading, "left"), turn(heading, "right")):
        dc, dr = h.delta
        if (cell.col + dc, cell.row + dr) == (target.col, target.row):
            return True
    return False


@dataclass(frozen=True)
class BaselineResult:
    waypoints: list[Waypoint]
    length: float
    complete: bool  # False when coverage ended without the target in view

    def to_dict(self) -> dict:
        return {"waypoints": [w.to_dict() for w in self.waypoints], "length": self.length,
                "complete": self.complete}


def baseline_path(area: Area, smap: SituationalMap, *, alt: float, start: Position,
                  final: Position | None = None, entry_hint: Position | None = None,
                  threat_radius: float = 400.0, margin: float = 200.0, step: float = 10.0,
                  threats: list[Position] | None = None) -> BaselineResult:
    """Low-altitude coverage re-entry with avoidance, cut once the target cell is in view.

    The path is a transit from ``start`` to the coverage entry followed by the
    boustrophedon itself; only the boustrophedon scans, so the cut is searched
    from the entry onward.  Without a target on the map the full coverage is
    returned and marked incomplete.  When ``final`` is given a direct leg to
    it closes the path.
    """
    cover = generate_search_path(area.center, area.side, area.spacing, alt, entry_hint or start,
                                 WaypointKind.BASELINE)
    cover = cover[:-1]  # no turnout on the low pass
    if threats is None:
        threats = [Position(*smap.georef.center(c)) for c in smap.cells_with("threat")]
    zones = [(p, threat_radius) for p in threats]
    sweep = avoid_threats([w.position for w in cover], zones, margin)
    transit = avoid_threats([start, sweep[0]], zones, margin)
    pts = transit + sweep[1:]
    first = len(transit) - 1  # segment index where coverage begins
    targets = smap.cells_with("target")
    g = smap.georef
    cut = None
    if targets:
        tgt = set(targets)
        for i in range(first, len(pts) - 1):
            a, b = pts[i], pts[i + 1]
            L = a.distance_2d(b)
            if L == 0:
                continue
            h = Heading.nearest(math.degrees(math.atan2(b.x - a.x, b.y - a.y)))
            k = 0
            while k * step <= L:
                t = min(1.0, k * step / L)
                p = Position(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, alt)
                if _in_grid(p, g):
                    cell = position_to_cell(p, g)
                    if any(sees_cell(g, cell, h, tc) for tc in tgt):
                        cut = (i, p)
                        break
                k += 1
            if cut:
                break
    if cut is None:
        keep = pts[1:]
        complete = False
    else:
        i, p = cut
        keep = pts[1:i + 1] + [p]
        complete = True
    if final is not None and complete:
        keep.append(Position(final.x, final.y, alt))
    wps = reindex(Waypoint(Position(p.x, p.y, alt), WaypointKind.BASELINE, 0) for p in keep)
    if wps:
        last = wps[-1]
        wps[-1] = Waypoint(last.position, WaypointKind.GOAL if complete else WaypointKind.BASELINE, last.index)
    return BaselineResult(wps, path_length([start] + [w.position for w in wps]), complete)


def _in_grid(p: Position, g: GridGeoref) -> bool:
    x0, y0, x1, y1 = g.bounds()
    return x0 <= p.x <= x1 and y0 <= p.y <= y1

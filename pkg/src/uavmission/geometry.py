"""Planar world model shared by every other module.

Positions live in a local east/north/up frame in meters.  Grid cells are
addressed ``(col, row)`` with ``col`` growing east and ``row`` growing north.
Courses are compass degrees: 0 is north, 90 is east.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator


class GeometryError(ValueError):
    pass


class BoundsError(GeometryError):
    """A position or cell lies outside the georeferenced grid."""

    def __init__(self, message: str, axis: str):
        super().__init__(message)
        self.axis = axis


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    alt: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "alt"):
            if not math.isfinite(getattr(self, name)):
                raise GeometryError(f"position {name} must be finite")
        if self.alt < 0:
            raise GeometryError("altitude must be >= 0")

    def distance_2d(self, other: "Position") -> float:
        return math.hypot(other.x - self.x, other.y - self.y)

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "alt": self.alt}

    @classmethod
    def from_dict(cls, d: dict) -> "Position":
        return cls(float(d["x"]), float(d["y"]), float(d.get("alt", 0.0)))


class Heading(enum.Enum):
    N = 0
    E = 90
    S = 180
    W = 270

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @property
    def symbol(self) -> str:
        return self.name.lower()

    @classmethod
    def from_symbol(cls, s: str) -> "Heading":
        return cls[s.upper()]

    @classmethod
    def nearest(cls, course: float) -> "Heading":
        """Grid heading closest to a compass course; exact diagonals go clockwise-first."""
        c = normalize_course(course)
        idx = int(math.floor((c + 45.0) / 90.0)) % 4
        return _ORDER[idx]


_ORDER = (Heading.N, Heading.E, Heading.S, Heading.W)
_DELTAS = {Heading.N: (0, 1), Heading.E: (1, 0), Heading.S: (0, -1), Heading.W: (-1, 0)}

TURNS = ("left", "right", "straight")


def turn(h: Heading, direction: str) -> Heading:
    i = _ORDER.index(h)
    if direction == "straight":
        return h
    if direction == "right":
        return _ORDER[(i + 1) % 4]
    if direction == "left":
        return _ORDER[(i - 1) % 4]
    raise GeometryError(f"unknown turn direction {direction!r}")


def normalize_course(deg: float) -> float:
    c = math.fmod(deg, 360.0)
    if c < 0:
        c += 360.0
    # fmod of a tiny negative can round up to exactly 360
    return 0.0 if c >= 360.0 else c


def course_between(a: Position, b: Position) -> float:
    return normalize_course(math.degrees(math.atan2(b.x - a.x, b.y - a.y)))


def angle_diff(target: float, current: float) -> float:
    """Signed smallest rotation (degrees, clockwise positive) from ``current`` to ``target``."""
    d = math.fmod(target - current + 180.0, 360.0)
    if d < 0:
        d += 360.0
    return d - 180.0


@dataclass(frozen=True, order=True)
class CellCoord:
    col: int
    row: int

    def __post_init__(self):
        if self.col < 0 or self.row < 0:
            raise BoundsError(f"negative cell index {self.col},{self.row}", "col" if self.col < 0 else "row")

    def step(self, h: Heading) -> tuple[int, int]:
        dc, dr = h.delta
        return self.col + dc, self.row + dr

    def name(self) -> str:
        return f"c{self.col}_{self.row}"

    def manhattan(self, other: "CellCoord") -> int:
        return abs(self.col - other.col) + abs(self.row - other.row)

    def to_list(self) -> list[int]:
        return [self.col, self.row]


def parse_cell_name(name: str) -> CellCoord:
    if not name.startswith("c") or "_" not in name:
        raise GeometryError(f"not a cell object name: {name!r}")
    col, row = name[1:].split("_", 1)
    return CellCoord(int(col), int(row))


@dataclass(frozen=True)
class GridGeoref:
    origin: Position
    cell_size: float = 600.0
    cols: int = 5
    rows: int = 5

    def __post_init__(self):
        if not self.cell_size > 0:
            raise GeometryError("cell_size must be > 0")
        if self.cols < 1 or self.rows < 1:
            raise GeometryError("grid needs at least one column and one row")

    def contains(self, c: CellCoord | tuple[int, int]) -> bool:
        col, row = (c.col, c.row) if isinstance(c, CellCoord) else c
        return 0 <= col < self.cols and 0 <= row < self.rows

    def cells(self) -> Iterator[CellCoord]:
        for row in range(self.rows):
            for col in range(self.cols):
                yield CellCoord(col, row)

    def center(self, c: CellCoord) -> tuple[float, float]:
        if not self.contains(c):
            raise BoundsError(f"cell {c.col},{c.row} outside {self.cols}x{self.rows} grid",
                              "col" if not 0 <= c.col < self.cols else "row")
        return (self.origin.x + c.col * self.cell_size, self.origin.y + c.row * self.cell_size)

    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the covered rectangle."""
        h = self.cell_size / 2
        return (self.origin.x - h, self.origin.y - h,
                self.origin.x + (self.cols - 1) * self.cell_size + h,
                self.origin.y + (self.rows - 1) * self.cell_size + h)

    def to_dict(self) -> dict:
        return {"origin": self.origin.to_dict(), "cell_size": self.cell_size,
                "cols": self.cols, "rows": self.rows}

    @classmethod
    def from_dict(cls, d: dict) -> "GridGeoref":
        return cls(Position.from_dict(d["origin"]), float(d["cell_size"]), int(d["cols"]), int(d["rows"]))


def _round_half_down(u: float) -> int:
    return int(math.ceil(u - 0.5))


def position_to_cell(p: Position, g: GridGeoref) -> CellCoord:
    """Cell whose center is nearest to ``p``; exact midpoints go to the smaller index."""
    xmin, ymin, xmax, ymax = g.bounds()
    if not xmin <= p.x <= xmax:
        raise BoundsError(f"x={p.x} outside [{xmin}, {xmax}]", "x")
    if not ymin <= p.y <= ymax:
        raise BoundsError(f"y={p.y} outside [{ymin}, {ymax}]", "y")
    col = _round_half_down((p.x - g.origin.x) / g.cell_size)
    row = _round_half_down((p.y - g.origin.y) / g.cell_size)
    # the upper boundary itself belongs to the last cell
    return CellCoord(min(max(col, 0), g.cols - 1), min(max(row, 0), g.rows - 1))


def nearest_cell(p: Position, g: GridGeoref) -> CellCoord:
    """Like :func:`position_to_cell` but clamps outside points onto the border."""
    col = _round_half_down((p.x - g.origin.x) / g.cell_size)
    row = _round_half_down((p.y - g.origin.y) / g.cell_size)
    return CellCoord(min(max(col, 0), g.cols - 1), min(max(row, 0), g.rows - 1))


class WaypointKind(str, enum.Enum):
    ROUTE = "route"
    SEARCH = "search"
    TURNOUT = "turnout"
    ACQUISITION = "acquisition"
    GOAL = "goal"
    BASELINE = "baseline"


@dataclass(frozen=True)
class Waypoint:
    position: Position
    kind: WaypointKind
    index: int
    gimbal: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        d = {"position": self.position.to_dict(), "kind": self.kind.value, "index": self.index}
        if self.gimbal:
            d["gimbal"] = list(self.gimbal)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Waypoint":
        return cls(Position.from_dict(d["position"]), WaypointKind(d["kind"]), int(d["index"]),
                   tuple(d.get("gimbal", ())))


def cell_to_waypoint(c: CellCoord, g: GridGeoref, alt: float, kind: WaypointKind | str,
                     index: int = 0) -> Waypoint:
    if alt < 0:
        raise GeometryError("altitude must be >= 0")
    x, y = g.center(c)
    return Waypoint(Position(x, y, alt), WaypointKind(kind), index)


def reindex(waypoints: Iterable[Waypoint]) -> list[Waypoint]:
    """Renumber a path so indices run 0..n-1."""
    return [Waypoint(w.position, w.kind, i, w.gimbal) for i, w in enumerate(waypoints)]


def path_length(points: Iterable[Position]) -> float:
    total = 0.0
    prev = None
    for p in points:
        if prev is not None:
            total += prev.distance_2d(p)
        prev = p
    return total


MARKERS = ("threat", "target", "scanned")


@dataclass
class SituationalMap:
    """Per-cell markers the agent has accumulated.  ``scanned`` is never cleared."""

    georef: GridGeoref
    markers: dict[CellCoord, dict[str, int]] = field(default_factory=dict)

    def mark(self, c: CellCoord, marker: str, tick: int) -> bool:
        """Set a marker; returns True when it was not set before."""
        if marker not in MARKERS:
            raise GeometryError(f"unknown marker {marker!r}")
        if not self.georef.contains(c):
            raise BoundsError(f"cell {c.col},{c.row} outside map", "col")
        cell = self.markers.setdefault(c, {})
        if marker in cell:
            return False
        cell[marker] = tick
        return True

    def unmark(self, c: CellCoord, marker: str) -> None:
        if marker == "scanned":
            raise GeometryError("scanned markers are monotone")
        self.markers.get(c, {}).pop(marker, None)

    def cells_with(self, marker: str) -> list[CellCoord]:
        return sorted(c for c, m in self.markers.items() if marker in m)

    def has(self, c: CellCoord, marker: str) -> bool:
        return marker in self.markers.get(c, {})

    def copy(self) -> "SituationalMap":
        return SituationalMap(self.georef, {c: dict(m) for c, m in self.markers.items()})

    def to_dict(self) -> dict:
        return {
            "georef": self.georef.to_dict(),
            "markers": [[c.col, c.row, dict(sorted(m.items()))] for c, m in sorted(self.markers.items())],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SituationalMap":
        m = cls(GridGeoref.from_dict(d["georef"]))
        for col, row, marks in d["markers"]:
            m.markers[CellCoord(col, row)] = {k: int(v) for k, v in marks.items()}
        return m

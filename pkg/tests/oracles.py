"""Independent reference implementations used only by the tests."""
from __future__ import annotations

from collections import deque

# (dcol, drow) per heading, clockwise from north
DELTA = {"n": (0, 1), "e": (1, 0), "s": (0, -1), "w": (-1, 0)}
CW = ["n", "e", "s", "w"]


def _left(h):
    return CW[(CW.index(h) + 3) % 4]


def _right(h):
    return CW[(CW.index(h) + 1) % 4]


def scan_bfs(cols, rows, start, heading, threats, target):
    """Fewest moves until ``target`` lies in the forward, left or right sector.

    Scans and acquisition are free, so this is the optimal cost of acquiring the
    target.  Returns None when no reachable pose sees the target.
    """
    threats = set(threats)

    def sees(cell, h):
        for d in (h, _left(h), _right(h)):
            dc, dr = DELTA[d]
            if (cell[0] + dc, cell[1] + dr) == target:
                return True
        return False

    seen = {(start, heading)}
    q = deque([(start, heading, 0)])
    while q:
        cell, h, dist = q.popleft()
        if sees(cell, h):
            return dist
        for nh in (h, _left(h), _right(h)):
            dc, dr = DELTA[nh]
            nxt = (cell[0] + dc, cell[1] + dr)
            if not (0 <= nxt[0] < cols and 0 <= nxt[1] < rows) or nxt in threats:
                continue
            if (nxt, nh) not in seen:
                seen.add((nxt, nh))
                q.append((nxt, nh, dist + 1))
    return None


def route_bfs(cols, rows, start, heading, threats, final):
    """Fewest forward/left/right moves from ``start`` to ``final`` avoiding threats."""
    threats = set(threats)
    seen = {(start, heading)}
    q = deque([(start, heading, 0)])
    while q:
        cell, h, dist = q.popleft()
        if cell == final:
            return dist
        for nh in (h, _left(h), _right(h)):
            dc, dr = DELTA[nh]
            nxt = (cell[0] + dc, cell[1] + dr)
            if 0 <= nxt[0] < cols and 0 <= nxt[1] < rows and nxt not in threats and (nxt, nh) not in seen:
                seen.add((nxt, nh))
                q.append((nxt, nh, dist + 1))
    return None


def acquire_and_route_bfs(cols, rows, start, heading, threats, target, final):
    """Fewest moves to see ``target`` at some point and then end on ``final``."""
    threats = set(threats)

    def sees(cell, h):
        return any((cell[0] + DELTA[d][0], cell[1] + DELTA[d][1]) == target for d in (h, _left(h), _right(h)))

    s0 = (start, heading, sees(start, heading))
    seen = {s0}
    q = deque([(s0, 0)])
    while q:
        (cell, h, got), dist = q.popleft()
        if got and cell == final:
            return dist
        for nh in (h, _left(h), _right(h)):
            dc, dr = DELTA[nh]
            nxt = (cell[0] + dc, cell[1] + dr)
            if not (0 <= nxt[0] < cols and 0 <= nxt[1] < rows) or nxt in threats:
                continue
            s = (nxt, nh, got or sees(nxt, nh))
            if s not in seen:
                seen.add(s)
                q.append((s, dist + 1))
    return None

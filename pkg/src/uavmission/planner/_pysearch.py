"""Pure-Python A* kernel.  Mirrors ``_native.pyx`` expansion for expansion."""
from __future__ import annotations

import heapq
import time

SOLVED, UNSOLVABLE, BUDGET, TIMEOUT = 0, 1, 2, 3


def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def astar(ct, node_budget: int, time_budget: float):
    """Return ``(status, local_action_path, cost, expanded, generated, bound)``."""
    n = len(ct.costs)
    pre = [_mask(p) for p in ct.pre]
    add = [_mask(a) for a in ct.add]
    dele = [~_mask(d) for d in ct.delete]
    cost = list(ct.costs)
    buckets: dict[int, list[int]] = {}
    for f, acts in ct.buckets.items():
        buckets[f] = acts
    always = ct.always
    goal = _mask(ct.goal)
    at_slot = ct.at_slot
    gfacts = ct.goal_facts
    relief = ct.relief
    bound = ct.bound
    ncells = ct.n_cells
    ng = len(gfacts)

    def h(s: int) -> int:
        if s & goal == goal:
            return 0
        cell = -1
        for f in _bits(s):
            if at_slot[f] >= 0:
                cell = at_slot[f]
                break
        if cell < 0:
            return 0
        best = 0
        for k in range(ng):
            if (s >> gfacts[k]) & 1:
                continue
            r = relief[k]
            if r >= 0 and (s >> r) & 1:
                continue
            v = bound[k * ncells + cell]
            if v > best:
                best = v
        return best

    init = _mask(ct.init)
    states = [init]
    gs = [0]
    parent = [-1]
    via = [-1]
    best = {init: 0}
    h0 = h(init)
    heap = [(h0, h0, 0, 0)]
    seq = 1
    expanded = 0
    deadline = time.monotonic() + time_budget
    while heap:
        f, hv, _, node = heapq.heappop(heap)
        s = states[node]
        if best[s] != node:
            continue
        if s & goal == goal:
            total = gs[node]
            path = []
            while via[node] >= 0:
                path.append(via[node])
                node = parent[node]
            path.reverse()
            return SOLVED, path, total, expanded, seq, f
        if expanded >= node_budget:
            return BUDGET, [], -1, expanded, seq, f
        expanded += 1
        if (expanded & 1023) == 0 and time.monotonic() > deadline:
            return TIMEOUT, [], -1, expanded, seq, f
        cand = list(always)
        for fct in _bits(s):
            b = buckets.get(fct)
            if b:
                cand.extend(b)
        cand.sort()
        g = gs[node]
        for a in cand:
            p = pre[a]
            if s & p != p:
                continue
            s2 = (s & dele[a]) | add[a]
            g2 = g + cost[a]
            old = best.get(s2)
            if old is not None and gs[old] <= g2:
                continue
            nid = len(states)
            states.append(s2)
            gs.append(g2)
            parent.append(node)
            via.append(a)
            best[s2] = nid
            h2 = h(s2)
            heapq.heappush(heap, (g2 + h2, h2, seq, nid))
            seq += 1
    return UNSOLVABLE, [], -1, expanded, seq, -1


def _mask(idx) -> int:
    m = 0
    for i in idx:
        m |= 1 << i
    return m

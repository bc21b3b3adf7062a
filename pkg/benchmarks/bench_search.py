"""Time the compiled and pure-Python A* kernels on the same random grid tasks.

    python benchmarks/bench_search.py [--sizes 10 25 40] [--instances 20] [--seed 0]

Task compilation is shared by both backends and timed on its own; the kernel
columns cover only the search (plus array packing for the native kernel).
Both kernels must return the same path and expansion count on every task;
the script exits non-zero if they ever disagree.
"""
from __future__ import annotations

import argparse
import random
import statistics
import sys
import time

from uavmission.geometry import CellCoord, Heading
from uavmission.pddl import droneworld_domain, ground
from uavmission.planner import SolverConfig, grid_problem
from uavmission.planner import search

HEADINGS = list(Heading)


def tasks(size: int, count: int, rng: random.Random):
    domain = droneworld_domain()
    cells = [CellCoord(c, r) for c in range(size) for r in range(size)]
    for _ in range(count):
        start = rng.choice(cells)
        threats = rng.sample([c for c in cells if c != start], len(cells) // 10)
        final = rng.choice([c for c in cells if c not in threats])
        yield ground(domain, grid_problem(size, size, start, rng.choice(HEADINGS), threats=threats,
                                          targets=[rng.choice(cells)], final=final))


def timed(ct, backend: str, cfg: SolverConfig):
    _, kernel = search._kernel(backend)
    t0 = time.perf_counter()
    status, path, cost, expanded, *_ = kernel(ct, cfg.node_budget, cfg.time_budget)
    return time.perf_counter() - t0, (int(status), list(path), int(cost), int(expanded))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 25, 40])
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if search._native is None:
        print("native kernel not built; nothing to compare", file=sys.stderr)
        return 1
    cfg = SolverConfig()
    print(f"{'grid':>6} {'tasks':>6} {'compile ms':>11} {'python ms':>10} {'native ms':>10} {'speedup':>8} "
          f"{'expanded':>9}")
    for size in args.sizes:
        rng = random.Random(args.seed * 1000 + size)
        comp_t, py_t, nat_t, expanded = [], [], [], []
        for task in tasks(size, args.instances, rng):
            t0 = time.perf_counter()
            ct = search.CompiledTask(task)
            comp_t.append(time.perf_counter() - t0)
            tp, rp = timed(ct, "python", cfg)
            tn, rn = timed(ct, "native", cfg)
            if rp != rn:
                print(f"backends disagree on {task.name}", file=sys.stderr)
                return 2
            py_t.append(tp)
            nat_t.append(tn)
            expanded.append(rp[3])
        mc, mp, mn = (statistics.median(x) * 1e3 for x in (comp_t, py_t, nat_t))
        print(f"{size:>4}^2 {len(py_t):>6} {mc:>11.2f} {mp:>10.2f} {mn:>10.2f} {mp / mn:>7.1f}x "
              f"{statistics.median(expanded):>9.0f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

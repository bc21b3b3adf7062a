"""Plan search over grounded tasks: optimal A* and policy rollouts.

Two interchangeable A* kernels exist: the compiled ``_native`` extension and
the pure-Python ``_pysearch`` module.  ``BACKEND`` names the one selected at
import; set ``UAVMISSION_BACKEND=python`` to force the fallback.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass
from itertools import chain
from typing import Protocol

import numpy as np

from ..geometry import GeometryError, parse_cell_name
from ..pddl import Atom, GroundAction, GroundedTask, Plan, validate_plan
from . import _pysearch

try:
    from . import _native
except ImportError:  # extension not built
    _native = None

BACKEND = "native" if _native is not None and os.environ.get("UAVMISSION_BACKEND", "") != "python" else "python"

_STATUS = {0: "solved", 1: "unsolvable", 2: "budget", 3: "timeout"}


class SearchBudgetError(RuntimeError):
    """The node or time budget ran out; ``bound`` is a lower bound on the optimal cost."""

    def __init__(self, message: str, bound: int, expanded: int):
        super().__init__(message)
        self.bound = bound
        self.expanded = expanded


class PolicyError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    mode: str = "optimal"
    policy: str = "greedy"
    node_budget: int = 200_000
    time_budget: float = 60.0
    step_cap: int = 10_000
    threats: str = "hard"
    backend: str = "auto"

    def __post_init__(self):
        if self.mode not in ("optimal", "policy"):
            raise ValueError(f"unknown solver mode {self.mode!r}")
        if self.node_budget <= 0 or self.time_budget <= 0 or self.step_cap <= 0:
            raise ValueError("solver budgets must be positive")
        if self.backend not in ("auto", "native", "python"):
            raise ValueError(f"unknown backend {self.backend!r}")
        threat_penalty(self)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "policy": self.policy, "node_budget": self.node_budget,
                "time_budget": self.time_budget, "step_cap": self.step_cap, "threats": self.threats,
                "backend": self.backend}

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        return cls(**d)


def threat_penalty(cfg: SolverConfig) -> int | None:
    """``None`` for hard threat constraints, else the per-entry penalty of ``soft:<n>``."""
    if cfg.threats == "hard":
        return None
    kind, _, value = cfg.threats.partition(":")
    if kind != "soft" or not value.isdigit():
        raise ValueError(f"threats must be 'hard' or 'soft:<penalty>', got {cfg.threats!r}")
    return int(value)


@dataclass(frozen=True)
class SolveResult:
    status: str
    plan: Plan | None
    expanded: int = 0
    generated: int = 0
    backend: str = ""
    wall_time: float = 0.0

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def stats(self) -> dict:
        return {"expanded": self.expanded, "generated": self.generated}


class GridHeuristic:
    """Max over open goals of the Manhattan distance from the UAV's cell.

    ``at(c)`` goals need the full distance; ``acquired(t)`` goals need only
    to reach a neighbour of ``t`` and are free once ``scanned(t)`` holds.
    Threats and turning are ignored, so the bound is admissible.
    """

    def __init__(self, task: GroundedTask):
        self.task = task
        cells = {}
        for i, atom in enumerate(task.facts):
            if atom.predicate == "at" and len(atom.args) == 1:
                try:
                    cells[i] = parse_cell_name(atom.args[0])
                except (GeometryError, ValueError):
                    continue
        self.cell_facts = cells
        slots = sorted(cells)
        self.at_slot = [-1] * task.n_facts
        for s, f in enumerate(slots):
            self.at_slot[f] = s
        self.n_cells = len(slots)
        self.goal_facts: list[int] = []
        self.relief: list[int] = []
        self.bound: list[int] = []
        if not cells:
            return
        for gf in sorted(task.goal):
            atom = task.facts[gf]
            if atom.predicate == "at" and len(atom.args) == 1:
                try:
                    c = parse_cell_name(atom.args[0])
                except (GeometryError, ValueError):
                    continue
                table = [cells[f].manhattan(c) for f in slots]
                relief = -1
            elif atom.predicate == "acquired" and len(atom.args) == 1:
                try:
                    c = parse_cell_name(atom.args[0])
                except (GeometryError, ValueError):
                    continue
                table = [max(0, cells[f].manhattan(c) - 1) for f in slots]
                relief = task.fact_index.get(Atom("scanned", atom.args), -1)
            else:
                continue
            self.goal_facts.append(gf)
            self.relief.append(relief)
            self.bound.extend(table)

    def __call__(self, state: frozenset[int]) -> int:
        if self.task.goal <= state:
            return 0
        cell = next((self.at_slot[f] for f in sorted(state) if self.at_slot[f] >= 0), -1)
        if cell < 0:
            return 0
        best = 0
        for k, gf in enumerate(self.goal_facts):
            r = self.relief[k]
            if gf in state or (r >= 0 and r in state):
                continue
            best = max(best, self.bound[k * self.n_cells + cell])
        return best


def heuristic(state: frozenset[int], task: GroundedTask) -> int:
    return GridHeuristic(task)(state)


def relevant_actions(task: GroundedTask) -> list[int]:
    """Backward relevance: actions that can contribute to the goal, in index order."""
    achievers: dict[int, list[int]] = {}
    for a in task.actions:
        for f in a.add:
            achievers.setdefault(f, []).append(a.index)
    facts = set(task.goal)
    todo = list(facts)
    chosen: set[int] = set()
    while todo:
        for i in achievers.get(todo.pop(), ()):
            if i not in chosen:
                chosen.add(i)
                for f in task.actions[i].pre:
                    if f not in facts:
                        facts.add(f)
                        todo.append(f)
    return sorted(chosen)


class CompiledTask:
    """Flat arrays consumed by both A* kernels."""

    def __init__(self, task: GroundedTask, costs: list[int] | None = None):
        self.task = task
        self.n_facts = task.n_facts
        self.acts = relevant_actions(task)
        acts = [task.actions[i] for i in self.acts]
        self.pre = [sorted(a.pre) for a in acts]
        self.add = [sorted(a.add) for a in acts]
        self.delete = [sorted(a.delete) for a in acts]
        self.costs = [a.cost if costs is None else costs[a.index] for a in acts]
        self.buckets: dict[int, list[int]] = {}
        self.always: list[int] = []
        for local, p in enumerate(self.pre):
            if p:
                self.buckets.setdefault(p[0], []).append(local)
            else:
                self.always.append(local)
        self.init = sorted(task.init)
        self.goal = sorted(task.goal)
        h = GridHeuristic(task)
        self.heuristic = h
        self.at_slot = h.at_slot
        self.n_cells = max(h.n_cells, 1)
        self.goal_facts = h.goal_facts
        self.relief = h.relief
        self.bound = h.bound

    def arrays(self) -> "CompiledTask":
        """Attach the numpy views the native kernel reads."""
        if hasattr(self, "np_cost"):
            return self

        def csr(lists):
            ptr = np.zeros(len(lists) + 1, dtype=np.int32)
            ptr[1:] = np.cumsum([len(x) for x in lists], dtype=np.int64)
            idx = np.array(list(chain.from_iterable(lists)), dtype=np.int32)
            return ptr, idx

        i32 = lambda x: np.ascontiguousarray(np.asarray(x, dtype=np.int32).reshape(-1))
        self.np_pre_ptr, self.np_pre_idx = csr(self.pre)
        self.np_add_ptr, self.np_add_idx = csr(self.add)
        self.np_del_ptr, self.np_del_idx = csr(self.delete)
        self.np_cost = np.asarray(self.costs, dtype=np.int64).reshape(-1)
        self.np_bucket_ptr, self.np_bucket_idx = csr([self.buckets.get(f, []) for f in range(self.n_facts)])
        self.np_always = i32(self.always)
        self.np_init = i32(self.init)
        self.np_goal = i32(self.goal)
        self.np_at_slot = i32(self.at_slot if self.at_slot else [-1])
        self.np_goal_facts = i32(self.goal_facts)
        self.np_relief = i32(self.relief)
        self.np_bound = i32(self.bound if self.bound else [0])
        return self


def _kernel(backend: str):
    if backend == "python" or (backend == "auto" and BACKEND == "python"):
        return "python", _pysearch.astar
    if _native is None:
        if backend == "native":
            raise RuntimeError("native search kernel is not built")
        return "python", _pysearch.astar
    return "native", lambda ct, nb, tb: _native.astar(ct.arrays(), nb, tb)


def with_costs(task: GroundedTask, costs: list[int]) -> GroundedTask:
    """Copy of ``task`` with per-action costs replaced."""
    acts = tuple(GroundAction(a.index, a.name, a.args, a.pre, a.add, a.delete, c)
                 for a, c in zip(task.actions, costs))
    return GroundedTask(task.facts, acts, task.init, task.goal, task.static_goal_holds,
                        task.static_facts, task.name)


def solve(task: GroundedTask, cfg: SolverConfig = SolverConfig()) -> SolveResult:
    t0 = time.perf_counter()
    if not task.static_goal_holds:
        return SolveResult("unsolvable", None, backend="static", wall_time=time.perf_counter() - t0)
    if cfg.mode == "policy":
        return _rollout(task, cfg, t0)
    ct = CompiledTask(task)
    name, kernel = _kernel(cfg.backend)
    status, path, cost, expanded, generated, bound = kernel(ct, cfg.node_budget, cfg.time_budget)
    label = _STATUS[int(status)]
    if label in ("budget", "timeout"):
        raise SearchBudgetError(f"search {label} exhausted after {expanded} expansions; "
                                f"optimal cost >= {bound}", int(bound), int(expanded))
    wall = time.perf_counter() - t0
    if label == "unsolvable":
        return SolveResult("unsolvable", None, int(expanded), int(generated), name, wall)
    plan = Plan.from_indices(task, [ct.acts[i] for i in path])
    if plan.cost != cost:
        raise AssertionError(f"kernel cost {cost} disagrees with plan cost {plan.cost}")
    report = validate_plan(task, plan)
    if not report.ok:
        raise AssertionError(f"search produced an invalid plan: {report.reason}")
    return SolveResult("solved", plan, int(expanded), int(generated), name, wall)


class Policy(Protocol):
    def reset(self, task: GroundedTask) -> None: ...

    def choose_action(self, state: frozenset[int], task: GroundedTask) -> int | None: ...


class GreedyHeuristicPolicy:
    """Pick the applicable action whose unvisited successor has the lowest heuristic value.

    Ties go to the cheaper action, then the lower action index.  Returns
    ``None`` at a dead end (every successor already visited).
    """

    def reset(self, task: GroundedTask) -> None:
        self.h = GridHeuristic(task)
        self.relevant = [task.actions[i] for i in relevant_actions(task)]
        self.visited = {task.init}

    def choose_action(self, state: frozenset[int], task: GroundedTask) -> int | None:
        best = None
        for a in self.relevant:
            if not a.pre <= state:
                continue
            nxt = (state - a.delete) | a.add
            if nxt in self.visited:
                continue
            key = (self.h(nxt), a.cost, a.index)
            if best is None or key < best[0]:
                best = (key, a.index, nxt)
        if best is None:
            return None
        self.visited.add(best[2])
        return best[1]


POLICIES = {"greedy": GreedyHeuristicPolicy}


def register_policy(name: str, factory) -> None:
    POLICIES[name] = factory


def _rollout(task: GroundedTask, cfg: SolverConfig, t0: float) -> SolveResult:
    try:
        policy = POLICIES[cfg.policy]()
    except KeyError:
        raise ValueError(f"unknown policy {cfg.policy!r}") from None
    policy.reset(task)
    state = task.init
    steps: list[int] = []
    for _ in range(cfg.step_cap):
        if task.goal_satisfied(state):
            plan = Plan.from_indices(task, steps)
            return SolveResult("solved", plan, len(steps), len(steps), "policy", time.perf_counter() - t0)
        a = policy.choose_action(state, task)
        if a is None:
            break
        act = task.actions[a]
        if not act.pre <= state:
            raise PolicyError(f"policy {cfg.policy!r} chose inapplicable action {act.ident}")
        state = (state - act.delete) | act.add
        steps.append(a)
    else:
        if task.goal_satisfied(state):
            return SolveResult("solved", Plan.from_indices(task, steps), len(steps), len(steps), "policy",
                               time.perf_counter() - t0)
    return SolveResult("policy-failed", None, len(steps), len(steps), "policy", time.perf_counter() - t0)

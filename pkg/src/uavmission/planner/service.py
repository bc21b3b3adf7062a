"""The ``dp.solve`` bus service.

The handler is stateless: everything it needs (knowledge snapshot, goal,
grid and solver settings, or a ready problem text) travels in the request,
so the planner's input can be rebuilt from a mission log alone.
"""
from __future__ import annotations

import hashlib
from typing import Callable

from ..geometry import GridGeoref
from ..knowledge import KnowledgeSnapshot
from ..pddl import Domain, GroundedTask, Problem, droneworld_text, ground, parse_domain, parse_problem
from .problem import GoalSpec, build_problem
from .search import SearchBudgetError, SolverConfig, solve, threat_penalty, with_costs
from .waypoints import MOVES, plan_to_waypoints

SERVICE = "dp.solve"

ArtifactSink = Callable[[str, str], None]


def sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def problem_text(payload: dict) -> str:
    """The exact problem text a ``dp.solve`` request describes."""
    if "problem" in payload:
        return payload["problem"]
    snap = KnowledgeSnapshot.from_dict(payload["snapshot"])
    text, _ = build_problem(snap, GoalSpec.from_dict(payload["goal"]), GridGeoref.from_dict(payload["georef"]))
    return text


def prepare_task(domain: Domain, problem: Problem, cfg: SolverConfig) -> GroundedTask:
    """Ground ``problem``; with ``threats=soft:<n>`` threat cells become enterable at extra cost."""
    penalty = threat_penalty(cfg)
    if penalty is None:
        return ground(domain, problem)
    threats = {a.args[0] for a in problem.init if a.predicate == "threat"}
    relaxed = Problem(problem.name, problem.domain_name, problem.objects,
                      frozenset(a for a in problem.init if a.predicate != "threat"), problem.goal)
    task = ground(domain, relaxed)
    costs = [a.cost + penalty if a.name in MOVES and a.args[1] in threats else a.cost for a in task.actions]
    return with_costs(task, costs)


class PlannerService:
    def __init__(self, domain_text: str | None = None, sink: ArtifactSink | None = None):
        self.domain_text = domain_text if domain_text is not None else droneworld_text()
        self.domain = parse_domain(self.domain_text, "domain.pddl")
        self.sink = sink

    def __call__(self, env) -> dict:
        return self.handle(env.payload)

    def handle(self, payload: dict) -> dict:
        label = str(payload.get("label", "plan"))
        cfg = SolverConfig.from_dict(payload.get("solver") or {})
        text = problem_text(payload)
        g = GridGeoref.from_dict(payload["georef"])
        alt = float(payload["goal"]["altitude"]) if "goal" in payload else float(payload.get("altitude", 60.0))
        if self.sink is not None:
            self.sink(f"{label}.problem.pddl", text)
        out = {"label": label, "problem_sha256": sha256(text)}
        task = prepare_task(self.domain, parse_problem(text, self.domain, f"{label}.problem.pddl"), cfg)
        try:
            res = solve(task, cfg)
        except SearchBudgetError as exc:
            out.update(status="budget", bound=exc.bound, stats={"expanded": exc.expanded})
            return out
        out.update(status=res.status, stats=res.stats())
        if not res.solved:
            return out
        wps = plan_to_waypoints(res.plan, g, alt)
        out.update(plan=list(res.plan.steps), cost=res.plan.cost, waypoints=[w.to_dict() for w in wps])
        if self.sink is not None:
            self.sink(f"{label}.plan", res.plan.to_text())
        return out


def threat_cells_entered(plan_steps, threats) -> list[str]:
    """Cells of ``threats`` a plan moves into; empty for a threat-respecting plan."""
    bad = {c if isinstance(c, str) else c.name() for c in threats}
    out = []
    for s in plan_steps:
        parts = s.strip("()").split()
        if parts[0] in MOVES and parts[2] in bad:
            out.append(parts[2])
    return out


__all__ = ["PlannerService", "SERVICE", "prepare_task", "problem_text", "sha256", "threat_cells_entered"]

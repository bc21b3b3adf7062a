"""Checks that rebuild planner traffic from a mission log alone."""
from __future__ import annotations

from dataclasses import dataclass

from ..pddl import droneworld_domain, parse_problem, validate_plan
from ..planner.search import SolverConfig
from ..planner.service import SERVICE, prepare_task, problem_text, sha256
from .missionlog import MissionLog


@dataclass(frozen=True)
class PlannerAudit:
    msg_id: int
    tick: int
    status: str
    hash_matches: bool
    plan_valid: bool | None  # None when the response carries no plan
    problem: str

    @property
    def ok(self) -> bool:
        return self.hash_matches and self.plan_valid is not False


def audit_planner_traffic(log: MissionLog, domain=None) -> list[PlannerAudit]:
    """Re-derive every ``dp.solve`` problem from its logged request and re-check the answer.

    The problem text is rebuilt from the request payload, hashed and compared
    with the hash the planner reported; a returned plan is validated against
    the rebuilt problem.
    """
    domain = domain or droneworld_domain()
    responses = {e["correlation_id"]: e for e in log.envelopes(SERVICE, "response")}
    out = []
    for req in log.envelopes(SERVICE, "request"):
        text = problem_text(req["payload"])
        resp = responses.get(req["msg_id"])
        body = (resp or {}).get("payload") or {}
        status = "missing" if resp is None else str(body.get("status", "error" if "error" in body else "?"))
        valid = None
        if body.get("plan") is not None:
            cfg = SolverConfig.from_dict(req["payload"].get("solver") or {})
            task = prepare_task(domain, parse_problem(text, domain, "replayed.problem.pddl"), cfg)
            valid = validate_plan(task, body["plan"]).ok
        out.append(PlannerAudit(req["msg_id"], req["tick"], status,
                                resp is not None and body.get("problem_sha256") == sha256(text), valid, text))
    return out


__all__ = ["PlannerAudit", "audit_planner_traffic"]

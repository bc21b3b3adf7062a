"""STRIPS progression and plan validation over a :class:`GroundedTask`."""
from __future__ import annotations

from dataclasses import dataclass

from .grounding import GroundAction, GroundedTask
from .sexpr import ParseError, read_all


class ContractError(ValueError):
    """An operation was called outside its precondition."""


@dataclass(frozen=True)
class Plan:
    steps: tuple[str, ...]
    cost: int

    @classmethod
    def from_indices(cls, task: GroundedTask, indices) -> "Plan":
        acts = [task.actions[i] for i in indices]
        return cls(tuple(a.ident for a in acts), sum(a.cost for a in acts))

    def indices(self, task: GroundedTask) -> list[int]:
        out = []
        for s in self.steps:
            i = task.lookup(s)
            if i is None:
                raise KeyError(s)
            out.append(i)
        return out

    def to_text(self) -> str:
        return "".join(s + "\n" for s in self.steps) + f"; cost = {self.cost}\n"

    def __len__(self) -> int:
        return len(self.steps)


def parse_plan(text: str, source: str | None = None) -> list[str]:
    """Read a plan file (one ``(action args...)`` per line, ``;`` comments) into identifiers."""
    steps = []
    for form in read_all(text, source):
        parts = []
        for item in form.items:
            if not hasattr(item, "value"):
                raise ParseError("nested list in plan step", item.line, item.col, "syntax.plan-step", source=source)
            parts.append(item.value.lower())
        if not parts:
            raise ParseError("empty plan step", form.line, form.col, "syntax.plan-step", source=source)
        steps.append("(" + " ".join(parts) + ")")
    return steps


def applicable(state: frozenset[int], action: GroundAction) -> bool:
    return action.pre <= state


def apply(state: frozenset[int], action: GroundAction) -> frozenset[int]:
    if not action.pre <= state:
        raise ContractError(f"{action.ident} is not applicable: missing facts {sorted(action.pre - state)}")
    return (state - action.delete) | action.add


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    failing_step: int | None
    final_state: frozenset[int]
    achieved_goal: bool
    total_cost: int
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.valid and self.achieved_goal


def validate_plan(task: GroundedTask, plan: Plan | list[str] | tuple[str, ...]) -> ValidationReport:
    steps = plan.steps if isinstance(plan, Plan) else tuple(plan)
    state = task.init
    cost = 0
    for i, ident in enumerate(steps):
        idx = task.lookup(ident)
        if idx is None:
            return ValidationReport(False, i, state, False, cost, f"unknown action {ident}")
        act = task.actions[idx]
        if not applicable(state, act):
            missing = ", ".join(str(task.facts[f]) for f in sorted(act.pre - state))
            return ValidationReport(False, i, state, False, cost, f"{ident} not applicable; missing {missing}")
        state = apply(state, act)
        cost += act.cost
    achieved = task.goal_satisfied(state)
    return ValidationReport(True, None, state, achieved, cost, "" if achieved else "goal not achieved")

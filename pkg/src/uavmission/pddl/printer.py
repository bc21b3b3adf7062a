"""Canonical PDDL writer.  Output is byte-stable for equal structures."""
from __future__ import annotations

from itertools import groupby

from .model import Domain, Literal, Problem


def _typed(pairs) -> str:
    groups = [(t, [n for n, _ in g]) for t, g in groupby(pairs, key=lambda p: p[1])]
    parts = []
    for i, (t, names) in enumerate(groups):
        # a trailing untyped group needs no tag; an earlier one would absorb the next type
        tag = "" if t == "object" and i == len(groups) - 1 else f" - {t}"
        parts.append(" ".join(names) + tag)
    return " ".join(parts)


def _conj(lits: tuple[Literal, ...] | list[Literal]) -> str:
    if len(lits) == 1:
        return str(lits[0])
    return "(and" + "".join(" " + str(l) for l in lits) + ")"


def format_domain(d: Domain) -> str:
    out = [f"(define (domain {d.name})"]
    if d.requirements:
        out.append("  (:requirements " + " ".join(d.requirements) + ")")
    if d.types:
        out.append("  (:types " + " ".join(d.types) + ")")
    if d.constants:
        out.append("  (:constants " + _typed(d.constants) + ")")
    out.append("  (:predicates")
    for p in d.predicates:
        params = _typed(p.params)
        out.append(f"    ({p.name}{' ' + params if params else ''})")
    out[-1] += ")"
    for a in d.actions:
        out.append(f"  (:action {a.name}")
        out.append(f"    :parameters ({_typed(a.params)})")
        out.append(f"    :precondition {_conj(a.precondition)}")
        eff = [Literal(x) for x in a.add] + [Literal(x, False) for x in a.delete]
        out.append(f"    :effect {_conj(eff)}")
        out.append(f"    (:action-cost {a.cost}))")
    out.append(")")
    return "\n".join(out) + "\n"


def format_problem(p: Problem) -> str:
    out = [f"(define (problem {p.name})", f"  (:domain {p.domain_name})"]
    out.append("  (:objects" + ("" if not p.objects else " " + _typed(p.objects)) + ")")
    out.append("  (:init")
    for atom in sorted(p.init):
        out.append(f"    {atom}")
    out[-1] += ")"
    out.append(f"  (:goal {_conj(p.goal)})")
    out.append(")")
    return "\n".join(out) + "\n"

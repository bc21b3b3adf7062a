"""Typed-STRIPS PDDL subset: reader, canonical printer, grounder and plan checker."""
from importlib import resources

from .grounding import DEFAULT_ACTION_CAP, GroundAction, GroundedTask, GroundingSizeError, ground
from .model import ActionSchema, Atom, Domain, Literal, PredicateSchema, Problem
from .parser import parse_domain, parse_problem
from .plan import ContractError, Plan, ValidationReport, applicable, apply, parse_plan, validate_plan
from .printer import format_domain, format_problem
from .sexpr import LexError, ParseError, PDDLError, SemanticError


def droneworld_text() -> str:
    return resources.files("uavmission.data").joinpath("droneworld_scan.pddl").read_text()


_DRONEWORLD: Domain | None = None


def droneworld_domain() -> Domain:
    global _DRONEWORLD
    if _DRONEWORLD is None:
        _DRONEWORLD = parse_domain(droneworld_text(), "droneworld_scan.pddl")
    return _DRONEWORLD


__all__ = [
    "ActionSchema", "Atom", "ContractError", "DEFAULT_ACTION_CAP", "Domain", "GroundAction",
    "GroundedTask", "GroundingSizeError", "LexError", "Literal", "PDDLError", "ParseError", "Plan",
    "PredicateSchema", "Problem", "SemanticError", "ValidationReport", "applicable", "apply",
    "droneworld_domain", "droneworld_text", "format_domain", "format_problem", "ground",
    "parse_domain", "parse_plan", "parse_problem", "validate_plan",
]

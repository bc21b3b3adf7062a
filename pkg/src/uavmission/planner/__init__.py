"""Dynamic planner: problem generation, plan search and waypoint translation."""
from .problem import GoalSpec, IncompleteSnapshotError, build_problem, goal_from_beliefs, grid_problem, make_problem
from .search import (BACKEND, POLICIES, CompiledTask, GreedyHeuristicPolicy, GridHeuristic, Policy, PolicyError,
                     SearchBudgetError, SolveResult, SolverConfig, heuristic, register_policy, relevant_actions,
                     solve, threat_penalty, with_costs)
from .waypoints import PlanTranslationError, plan_to_waypoints, start_gimbal

__all__ = [
    "BACKEND", "CompiledTask", "GoalSpec", "GreedyHeuristicPolicy", "GridHeuristic", "IncompleteSnapshotError",
    "POLICIES", "PlanTranslationError", "Policy", "PolicyError", "SearchBudgetError", "SolveResult",
    "SolverConfig", "build_problem", "goal_from_beliefs", "grid_problem", "heuristic", "make_problem",
    "plan_to_waypoints", "register_policy", "relevant_actions", "solve", "start_gimbal", "threat_penalty",
    "with_costs",
]

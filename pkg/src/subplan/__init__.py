"""Subgoal-partitioned planning for STRIPS, durative and resource-consuming PDDL tasks.

The goal conjunction is split into one subproblem per conjunct.  Each is
solved by a penalty-biased greedy best-first search, the subplans are
merged and scheduled, and penalties on conflicting subproblem pairs grow
until the merged plan validates.
"""

from __future__ import annotations

from .errors import (
    BudgetExceeded, CapExceeded, GroundingError, NegativeWeight, NoPath, NumericInfeasible, NumericUnderflow,
    ParseError, PartitionError, PlanningError, PlanningTypeError, SearchTimeout, Unsolvable, UnsupportedFeature,
)
from .mutex import LocalityReport, MutexTable, ValidationReport, locality, persistent_mutexes, validate
from .pddl import ground, load, load_files, parse_domain, parse_problem
from .pert import TemporalSchedule, schedule
from .planfile import format_plan, parse_plan
from .resolve import PlannerConfig, PlanResult, plan, resolve
from .task import GroundAction, GroundTask, ScheduledAction, State, apply, apply_sequence

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded", "CapExceeded", "GroundingError", "NegativeWeight", "NoPath", "NumericInfeasible",
    "NumericUnderflow", "ParseError", "PartitionError", "PlanningError", "PlanningTypeError", "SearchTimeout",
    "Unsolvable", "UnsupportedFeature", "LocalityReport", "MutexTable", "ValidationReport", "locality",
    "persistent_mutexes", "validate", "ground", "load", "load_files", "parse_domain", "parse_problem",
    "TemporalSchedule", "schedule", "format_plan", "parse_plan", "PlannerConfig", "PlanResult", "plan",
    "resolve", "GroundAction", "GroundTask", "ScheduledAction", "State", "apply", "apply_sequence",
]

"""Exception hierarchy shared by the planner modules."""

from __future__ import annotations


class PlanningError(Exception):
    """Base class for every error raised by this package."""


class ParseError(PlanningError, SyntaxError):
    """Malformed PDDL input, with a 1-based line/column position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class UnsupportedFeature(PlanningError):
    """A PDDL construct outside the supported STRIPS/durative/numeric subset."""

    def __init__(self, construct: str, line: int = 0, col: int = 0):
        super().__init__(construct)
        self.construct = construct
        self.line = line
        self.col = col

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: unsupported construct '{self.construct}'"


class GroundingError(PlanningError):
    """Problem/domain mismatch detected while instantiating schemas."""


class PlanningTypeError(GroundingError, TypeError):
    """Object used where its declared type does not fit the parameter type."""


class NumericUnderflow(PlanningError):
    """A decrease effect would drive a resource below zero."""

    def __init__(self, resource: int, value):
        super().__init__(f"resource {resource} would become {value}")
        self.resource = resource
        self.value = value


class NumericInfeasible(PlanningError):
    """No start time keeps every resource inside its bounds."""


class PartitionError(PlanningError):
    """A plan action is not attributed to any subproblem."""


class NoPath(PlanningError):
    """The fact-group transition graph does not connect source and target."""


class NegativeWeight(PlanningError):
    """Dijkstra was handed a negative edge weight."""


class SearchTimeout(PlanningError):
    """The base planner exhausted its node-expansion limit."""

    def __init__(self, expansions: int):
        super().__init__(f"node limit reached after {expansions} expansions")
        self.expansions = expansions


class Unsolvable(PlanningError):
    """Proof that no plan exists (search space or relaxation exhausted)."""


class BudgetExceeded(PlanningError):
    """Iteration or wall-clock budget ran out before a valid plan was found."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class CapExceeded(PlanningError):
    """Breadth-first oracle visited more states than its cap allows."""

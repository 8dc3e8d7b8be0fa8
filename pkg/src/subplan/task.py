"""Grounded task representation and the sequential execution semantics.

States are immutable: a frozenset of fact ids plus a tuple of exact
resource amounts.  Applying an inapplicable action is a no-op rather than
an error; only a decrease that would make a resource negative raises.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .errors import NumericUnderflow

Atom = tuple  # (predicate, arg1, ..., argN)

START, OVERALL, END = "start", "overall", "end"


def atom_str(atom: Atom) -> str:
    return "(" + " ".join(atom) + ")"


def format_decimal(value) -> str:
    """Exact decimal text for a rational; falls back to ``n/d`` when it does not terminate."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    for digits in range(1, 40):
        scaled = value * 10**digits
        if scaled.denominator == 1:
            sign = "-" if scaled < 0 else ""
            text = str(abs(scaled.numerator)).rjust(digits + 1, "0")
            return f"{sign}{text[:-digits]}.{text[-digits:]}".rstrip("0")
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class NumericCondition:
    resource: int
    op: str  # ">=" or "<="
    value: Fraction
    timing: str = START

    def holds(self, amount: Fraction) -> bool:
        if self.op == ">=":
            return amount >= self.value
        return amount <= self.value


@dataclass(frozen=True)
class NumericEffect:
    resource: int
    delta: Fraction  # signed
    timing: str = START


@dataclass(frozen=True)
class GroundAction:
    id: int
    name: str
    args: tuple[str, ...] = ()
    pre_start: frozenset = frozenset()
    pre_overall: frozenset = frozenset()
    pre_end: frozenset = frozenset()
    add_start: frozenset = frozenset()
    add_end: frozenset = frozenset()
    del_start: frozenset = frozenset()
    del_end: frozenset = frozenset()
    num_pre: tuple[NumericCondition, ...] = ()
    num_eff: tuple[NumericEffect, ...] = ()
    duration: Fraction = Fraction(0)
    durative: bool = False

    def __post_init__(self):
        if self.add_start & self.del_start or self.add_end & self.del_end:
            raise ValueError(f"action {self.label}: add and delete overlap")
        if self.duration < 0:
            raise ValueError(f"action {self.label}: negative duration")

    @property
    def label(self) -> str:
        return "(" + " ".join((self.name,) + self.args) + ")"

    @cached_property
    def pre(self) -> frozenset:
        return self.pre_start | self.pre_overall | self.pre_end

    @cached_property
    def adds(self) -> frozenset:
        return self.add_start | self.add_end

    @cached_property
    def dels(self) -> frozenset:
        return self.del_start | self.del_end

    @cached_property
    def relaxed_pre(self) -> frozenset:
        """Preconditions that must hold before the action under delete relaxation."""
        return self.pre_start | ((self.pre_overall | self.pre_end) - self.add_start)

    def timed_sets(self, kind: str) -> dict[str, frozenset]:
        if kind == "pre":
            return {START: self.pre_start, OVERALL: self.pre_overall, END: self.pre_end}
        if kind == "add":
            return {START: self.add_start, END: self.add_end}
        return {START: self.del_start, END: self.del_end}


@dataclass(frozen=True)
class State:
    facts: frozenset
    numerics: tuple = ()

    def with_numerics(self, values: Sequence[Fraction]) -> "State":
        return State(self.facts, tuple(values))


@dataclass(frozen=True)
class SequentialPlan:
    steps: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def __add__(self, other: "SequentialPlan") -> "SequentialPlan":
        return SequentialPlan(self.steps + tuple(other.steps))


@dataclass(frozen=True, order=True)
class ScheduledAction:
    start: Fraction
    action: int
    end: Fraction

    @property
    def duration(self) -> Fraction:
        return self.end - self.start

    @classmethod
    def at(cls, action: GroundAction, start) -> "ScheduledAction":
        start = Fraction(start)
        return cls(start, action.id, start + action.duration)


@dataclass(frozen=True)
class GroundTask:
    facts: tuple[Atom, ...]
    actions: tuple[GroundAction, ...]
    init: State
    goals: tuple[int, ...]
    resources: tuple[Atom, ...] = ()
    resource_bounds: tuple = ()  # optional upper bound per resource (None = unbounded)
    name: str = "task"
    domain_name: str = "domain"
    metric: str | None = None
    fact_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if not self.fact_index:
            object.__setattr__(self, "fact_index", {a: i for i, a in enumerate(self.facts)})
        if not self.resource_bounds:
            object.__setattr__(self, "resource_bounds", (None,) * len(self.resources))

    @cached_property
    def temporal(self) -> bool:
        return any(a.durative for a in self.actions)

    @cached_property
    def achievers(self) -> dict[int, tuple[int, ...]]:
        table: dict[int, list[int]] = {}
        for a in self.actions:
            for f in a.adds:
                table.setdefault(f, []).append(a.id)
        return {f: tuple(ids) for f, ids in table.items()}

    @cached_property
    def action_index(self) -> dict[tuple, int]:
        return {(a.name,) + a.args: a.id for a in self.actions}

    def fact_label(self, fact: int) -> str:
        return atom_str(self.facts[fact])

    def resource_label(self, resource: int) -> str:
        return atom_str(self.resources[resource])

    def replace(self, **changes) -> "GroundTask":
        fields = dict(
            facts=self.facts, actions=self.actions, init=self.init, goals=self.goals,
            resources=self.resources, resource_bounds=self.resource_bounds,
            name=self.name, domain_name=self.domain_name, metric=self.metric,
        )
        fields.update(changes)
        return GroundTask(**fields)


def _numeric_ok(conds: Iterable[NumericCondition], values: Sequence[Fraction], timings) -> bool:
    return all(c.holds(values[c.resource]) for c in conds if c.timing in timings)


def _apply_numeric(values: list, effects: Iterable[NumericEffect], timing: str) -> None:
    for eff in effects:
        if eff.timing != timing:
            continue
        new = values[eff.resource] + eff.delta
        if new < 0:
            raise NumericUnderflow(eff.resource, new)
        values[eff.resource] = new


def applicable(state: State, action: GroundAction) -> bool:
    if not action.pre_start <= state.facts:
        return False
    if not _numeric_ok(action.num_pre, state.numerics, (START,)):
        return False
    mid = (state.facts - action.del_start) | action.add_start
    if not (action.pre_overall | action.pre_end) <= mid:
        return False
    if action.num_pre and any(c.timing != START for c in action.num_pre):
        values = list(state.numerics)
        try:
            _apply_numeric(values, action.num_eff, START)
        except NumericUnderflow:
            return True  # applicable, but apply() will raise
        return _numeric_ok(action.num_pre, values, (OVERALL, END))
    return True


def apply(state: State, action: GroundAction) -> State:
    """Result of executing ``action`` in ``state`` with start/end effects collapsed.

    Start effects are applied before end effects, so an action that frees a
    fact at its start and restores it at its end leaves it true.  Returns the
    state unchanged when a precondition does not hold.
    """
    if not applicable(state, action):
        return state
    facts = (state.facts - action.del_start) | action.add_start
    facts = (facts - action.del_end) | action.add_end
    if not action.num_eff:
        return State(facts, state.numerics)
    values = list(state.numerics)
    _apply_numeric(values, action.num_eff, START)
    _apply_numeric(values, action.num_eff, END)
    return State(facts, tuple(values))


def apply_sequence(state: State, plan: SequentialPlan | Iterable[GroundAction], task: GroundTask | None = None) -> State:
    """Left fold of :func:`apply`; plan steps may be ids (needs ``task``) or actions."""
    steps = plan.steps if isinstance(plan, SequentialPlan) else plan
    for step in steps:
        action = task.actions[step] if isinstance(step, int) else step
        state = apply(state, action)
    return state


def goal_satisfied(state: State, goals: Iterable[int]) -> bool:
    return frozenset(goals) <= state.facts


def successors(state: State, actions: Iterable[GroundAction]):
    """Yield (action, next_state) for every action that actually changes nothing-or-something legally."""
    for action in actions:
        if not applicable(state, action):
            continue
        try:
            yield action, apply(state, action)
        except NumericUnderflow:
            continue

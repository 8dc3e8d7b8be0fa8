"""Greedy best-first search for one subproblem, biased by conflict penalties.

The priority of a node is

    h + sum_k gamma[k] * m[k]  (+ tau * makespan estimate in quality mode)

where h is the relaxed-plan length and m[k] estimates how many mutexes
the path so far plus the relaxed plan would share with subplan k.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import NumericUnderflow, SearchTimeout, Unsolvable
from .heuristic import INF, HeuristicValue, ff_heuristic
from .mutex import MutexTable
from .pert import estimate_makespan
from .task import GroundAction, GroundTask, State, applicable, apply


@dataclass
class SearchConfig:
    node_limit: int = 3000
    tau: Fraction = Fraction(1, 10000)
    quality: bool = False
    deadline: float | None = None  # time.monotonic() value

    def __post_init__(self):
        if self.node_limit <= 0:
            raise ValueError("node_limit must be positive")


@dataclass
class PenaltyContext:
    """What the other subproblems look like from subproblem ``t``.

    ``others[k]`` lists the action ids of subplan k that are not shared
    with the start prefix; ``gamma[k]`` is the penalty weight for k.
    """

    table: MutexTable
    gamma: Mapping[int, Fraction] = field(default_factory=dict)
    others: Mapping[int, Sequence[int]] = field(default_factory=dict)
    other_goals: Mapping[int, frozenset] = field(default_factory=dict)
    prefix: Sequence[int] = ()  # actions already executed to reach the start state

    def __post_init__(self):
        self.keys = sorted(set(self.others) | set(self.other_goals))
        self._cache: dict[int, tuple] = {}

    def vector(self, aid: int) -> tuple:
        """Estimated conflicts of one action with every other subplan."""
        if aid not in self._cache:
            acts = self.table.actions
            a = acts[aid]
            partners = self.table.partners(aid)
            row = []
            for k in self.keys:
                n = sum(1 for b in self.others.get(k, ()) if b in partners)
                n += len(a.dels & self.other_goals.get(k, frozenset()))
                row.append(n)
            self._cache[aid] = tuple(row)
        return self._cache[aid]

    def estimate(self, actions: Sequence[int]) -> tuple:
        """m-tilde of a list of (relaxed or path) actions: brute sum of per-action vectors."""
        total = [0] * len(self.keys)
        for aid in actions:
            for i, n in enumerate(self.vector(aid)):
                total[i] += n
        return tuple(total)

    @property
    def active(self) -> bool:
        return any(self.gamma.get(k, 0) for k in self.keys)


def estimate_conflicts(relaxed_plan: Sequence[int], ctx: PenaltyContext) -> tuple:
    return ctx.estimate(relaxed_plan)


def biased_objective(
    h: float,
    gamma: Sequence[Fraction],
    m_tilde: Sequence[int],
    t_tilde: Fraction = Fraction(0),
    quality: bool = False,
    tau: Fraction = Fraction(1, 10000),
) -> Fraction:
    if h == INF:
        raise ValueError("objective undefined for an infinite heuristic")
    value = Fraction(h) + sum((Fraction(g) * m for g, m in zip(gamma, m_tilde)), Fraction(0))
    if quality:
        value += Fraction(tau) * Fraction(t_tilde)
    return value


@dataclass
class SearchResult:
    plan: list
    expansions: int
    state: State
    objective: Fraction = Fraction(0)


@dataclass
class _Node:
    state: State
    parent: "_Node | None"
    action: int | None
    path_m: tuple
    depth: int = 0

    def path(self) -> list[int]:
        out = []
        node = self
        while node.parent is not None:
            out.append(node.action)
            node = node.parent
        return out[::-1]


def solve_subproblem(
    task: GroundTask,
    start: State,
    goals: Sequence[int],
    actions: Sequence[GroundAction] | None = None,
    context: PenaltyContext | None = None,
    config: SearchConfig | None = None,
) -> SearchResult:
    """Greedy best-first search from ``start`` until every fact of ``goals`` holds.

    Ties are broken by lower h, then helpful actions, then lower action id,
    then insertion order.  Raises :class:`SearchTimeout` once ``node_limit``
    nodes have been expanded and :class:`Unsolvable` when the open list runs
    dry.
    """
    config = config or SearchConfig()
    actions = list(task.actions if actions is None else actions)
    goals = tuple(goals)
    goal_set = frozenset(goals)
    keys = context.keys if context else []
    gamma = [Fraction(context.gamma.get(k, 0)) for k in keys] if context else []
    penalised = context is not None and context.active
    other_plans = [list(context.others.get(k, ())) for k in keys] if context else []

    def evaluate(state: State, path_m: tuple, path: list[int]) -> tuple[HeuristicValue, Fraction]:
        hv = ff_heuristic(state, actions, goals)
        if hv.h == INF:
            return hv, Fraction(0)
        m = path_m
        if penalised:
            m = tuple(x + y for x, y in zip(path_m, context.estimate(hv.relaxed_plan)))
        t_tilde = Fraction(0)
        if config.quality:
            prefix = list(context.prefix) if context else []
            t_tilde = estimate_makespan(prefix + path + hv.relaxed_plan, other_plans, task,
                                        context.table if context else None)
        hv.m_tilde, hv.t_tilde = m, t_tilde
        return hv, biased_objective(hv.h, gamma, m, t_tilde, config.quality, config.tau)

    zero = tuple(0 for _ in keys)
    root = _Node(start, None, None, zero)
    root_h, root_obj = evaluate(start, zero, [])
    if root_h.h == INF:
        raise Unsolvable("subgoal unreachable under delete relaxation")
    counter = itertools.count()
    heap = [(root_obj, root_h.h, 0, -1, next(counter), root, root_h.helpful)]
    seen = {start}
    expansions = 0
    while heap:
        obj, h, _, _, _, node, helpful = heapq.heappop(heap)
        if goal_set <= node.state.facts:
            return SearchResult(node.path(), expansions, node.state, obj)
        if expansions >= config.node_limit:
            raise SearchTimeout(expansions)
        if config.deadline is not None and time.monotonic() > config.deadline:
            raise SearchTimeout(expansions)
        expansions += 1
        path = None
        for a in actions:
            if not applicable(node.state, a):
                continue
            try:
                child = apply(node.state, a)
            except NumericUnderflow:
                continue
            if child in seen:
                continue
            seen.add(child)
            path_m = node.path_m
            if penalised:
                path_m = tuple(x + y for x, y in zip(path_m, context.vector(a.id)))
            if config.quality and path is None:
                path = node.path()
            hv, value = evaluate(child, path_m, (path or []) + [a.id])
            if hv.h == INF:
                continue
            heapq.heappush(
                heap,
                (value, hv.h, 0 if a.id in helpful else 1, a.id, next(counter),
                 _Node(child, node, a.id, path_m, node.depth + 1), hv.helpful),
            )
    raise Unsolvable(f"search space exhausted after {expansions} expansions")

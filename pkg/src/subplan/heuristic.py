"""Delete-relaxed planning graph, relaxed-plan heuristic and relevance analysis.

Numeric conditions are relaxed monotonically: ``(>= r c)`` counts as
reachable once the current amount meets it or some reachable action
increases ``r`` (it may then be repeated); ``(<= r c)`` likewise with
decreasing actions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .task import GroundAction, GroundTask, NumericCondition, State

INF = math.inf


@dataclass
class RelaxedGraph:
    fact_levels: dict  # fact id -> level (missing = unreachable)
    action_levels: dict  # action id -> level
    supporters: dict  # fact id -> chosen achieving action id
    numeric_levels: dict = field(default_factory=dict)  # NumericCondition key -> level
    numeric_supporters: dict = field(default_factory=dict)  # key -> action id

    def level(self, fact: int) -> float:
        return self.fact_levels.get(fact, INF)

    def reachable(self, facts: Iterable[int]) -> bool:
        return all(f in self.fact_levels for f in facts)


@dataclass
class HeuristicValue:
    h: float
    relaxed_plan: list = field(default_factory=list)
    helpful: frozenset = frozenset()
    m_tilde: tuple = ()
    t_tilde: Fraction = Fraction(0)


def _num_key(c: NumericCondition) -> tuple:
    return (c.resource, c.op, c.value)


def _num_holds(key: tuple, values: Sequence[Fraction]) -> bool:
    r, op, v = key
    return values[r] >= v if op == ">=" else values[r] <= v


def relaxed_graph(
    state: State,
    actions: Iterable[GroundAction],
    goals: Iterable[int] = (),
    suppressed: frozenset = frozenset(),
    stop_at_goals: bool = True,
) -> RelaxedGraph:
    """Layer facts and actions by first appearance, ignoring deletes.

    A fact's supporter is the achiever of lowest additive cost among those
    first reaching it, ties going to the lower action id.  ``suppressed`` facts are never made true and actions needing them are
    never applied (used by the landmark test).
    """
    actions = [a for a in actions if not (a.relaxed_pre & suppressed)]
    goals = frozenset(goals)
    levels = {f: 0 for f in state.facts if f not in suppressed}
    costs = dict.fromkeys(levels, 0)  # additive cost of each reached fact via its supporter
    action_levels: dict[int, int] = {}
    supporters: dict[int, int] = {}
    num_levels: dict[tuple, int] = {}
    num_supporters: dict[tuple, int] = {}
    up: dict[int, int] = {}  # resource -> level of first increasing action
    down: dict[int, int] = {}
    values = state.numerics

    def num_level(key) -> float:
        if key in num_levels:
            return num_levels[key]
        if _num_holds(key, values):
            num_levels[key] = 0
            return 0
        return INF

    pending = list(actions)
    layer = 0
    while pending:
        if stop_at_goals and goals and all(g in levels for g in goals):
            break
        layer += 1
        fired = []
        rest = []
        for a in pending:
            ok = all(levels.get(f, INF) < layer for f in a.relaxed_pre)
            if ok:
                for c in a.num_pre:
                    key = _num_key(c)
                    lv = num_level(key)
                    if lv == INF:
                        r, op, _ = key
                        src = up if op == ">=" else down
                        if r in src and src[r] < layer:
                            num_levels[key] = src[r]
                            lv = src[r]
                    if not lv < layer:
                        ok = False
                        break
            (fired if ok else rest).append(a)
        if not fired:
            break
        best: dict[int, tuple] = {}
        for a in fired:
            action_levels[a.id] = layer
            cost = 1 + sum(costs[p] for p in a.relaxed_pre)
            for f in a.adds - suppressed:
                if f not in levels and (f not in best or (cost, a.id) < best[f]):
                    best[f] = (cost, a.id)
            for e in a.num_eff:
                src = up if e.delta > 0 else down
                if e.delta != 0 and e.resource not in src:
                    src[e.resource] = layer
                    num_supporters[(e.resource, ">=" if e.delta > 0 else "<=")] = a.id
        for f, (cost, aid) in best.items():
            levels[f] = layer
            costs[f] = cost
            supporters[f] = aid
        pending = rest
    return RelaxedGraph(levels, action_levels, supporters, num_levels, num_supporters)


def _extract(graph: RelaxedGraph, state: State, goals: Iterable[int], actions_by_id: dict) -> tuple[list, frozenset]:
    buckets: dict[int, set] = {}
    chosen: list[tuple[int, int]] = []
    marked: set[int] = set()
    helpful: set[int] = set()
    copies: dict[tuple, int] = {}  # numeric supporter key -> copies already in the plan

    def choose(aid: int, n: int = 1) -> None:
        lv = graph.action_levels[aid]
        chosen.extend([(lv, aid)] * n)
        if lv == 1:
            helpful.add(aid)
        a = actions_by_id[aid]
        marked.update(f for f in a.adds if graph.fact_levels.get(f) == lv)
        for p in a.relaxed_pre:
            lp = graph.fact_levels[p]
            if lp > 0 and p not in marked:
                buckets.setdefault(lp, set()).add(p)
        for c in a.num_pre:
            if _num_holds(_num_key(c), state.numerics):
                continue
            key = (c.resource, ">=" if c.op == ">=" else "<=")
            sid = graph.numeric_supporters[key]
            delta = max(abs(e.delta) for e in actions_by_id[sid].num_eff if e.resource == c.resource)
            need = max(1, math.ceil(abs(c.value - state.numerics[c.resource]) / delta))
            if need > copies.get(key, 0):
                extra = need - copies.get(key, 0)
                copies[key] = need
                choose(sid, extra)

    for g in goals:
        lv = graph.fact_levels[g]
        if lv > 0:
            buckets.setdefault(lv, set()).add(g)
    lv = max(buckets, default=0)
    while lv > 0:
        for g in sorted(buckets.get(lv, ())):
            if g not in marked:
                choose(graph.supporters[g])
        lv -= 1
    chosen.sort(key=lambda p: p[0])
    return [aid for _, aid in chosen], frozenset(helpful)


def ff_heuristic(
    state: State, actions: Sequence[GroundAction], goals: Iterable[int], graph: RelaxedGraph | None = None
) -> HeuristicValue:
    goals = tuple(goals)
    if all(g in state.facts for g in goals):
        return HeuristicValue(0)
    graph = graph or relaxed_graph(state, actions, goals)
    if not graph.reachable(goals):
        return HeuristicValue(INF)
    plan, helpful = _extract(graph, state, goals, {a.id: a for a in actions})
    return HeuristicValue(len(plan), plan, helpful)


def execute_relaxed(state: State, plan: Iterable[GroundAction]) -> set[int] | None:
    """Run a plan ignoring deletes and numeric conditions; None if a fact precondition is missing."""
    facts = set(state.facts)
    for a in plan:
        if not a.relaxed_pre <= facts:
            return None
        facts |= a.adds
    return facts


def reduce_actions(task: GroundTask, subgoals: Iterable[int], disabled: frozenset = frozenset()) -> list[GroundAction]:
    """Actions that can contribute to ``subgoals`` (backward fixpoint over achievers)."""
    open_facts = list(subgoals)
    closed: set[int] = set()
    relevant: set[int] = set()
    open_numeric: list[tuple] = []
    seen_numeric: set[tuple] = set()
    changers: dict[tuple, list[int]] = {}
    for a in task.actions:
        for e in a.num_eff:
            changers.setdefault((e.resource, ">=" if e.delta > 0 else "<="), []).append(a.id)

    def add_action(aid: int) -> None:
        if aid in relevant or aid in disabled:
            return
        relevant.add(aid)
        a = task.actions[aid]
        open_facts.extend(a.pre)
        for c in a.num_pre:
            open_numeric.append((c.resource, c.op))

    while open_facts or open_numeric:
        while open_facts:
            f = open_facts.pop()
            if f in closed:
                continue
            closed.add(f)
            for aid in task.achievers.get(f, ()):
                add_action(aid)
        while open_numeric:
            key = open_numeric.pop()
            if key in seen_numeric:
                continue
            seen_numeric.add(key)
            for aid in changers.get(key, ()):
                add_action(aid)
    return [task.actions[i] for i in sorted(relevant)]

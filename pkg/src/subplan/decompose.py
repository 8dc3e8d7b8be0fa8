"""Goal partitioning and the structural analyses that support it.

* one subproblem per top-level goal conjunct, in file order;
* landmarks by suppression in the relaxed planning graph;
* fact groups (exactly-one-location style invariants) and their
  transition graphs, used to force a path when landmarks are scarce;
* producible facts and resources, and the loop that trims the initial
  amount of producible resources down to what a plan really consumes.
"""

from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .errors import NegativeWeight, NoPath, PlanningError, Unsolvable
from .heuristic import reduce_actions, relaxed_graph
from .task import GroundAction, GroundTask, State, apply_sequence


@dataclass
class Subproblem:
    index: int
    goal: int
    actions: list  # relevant GroundActions
    landmarks: list | None = None  # computed on demand, then cached


@dataclass
class SubproblemSet:
    subproblems: list

    def __len__(self) -> int:
        return len(self.subproblems)

    def __iter__(self):
        return iter(self.subproblems)

    def __getitem__(self, i) -> Subproblem:
        return self.subproblems[i]


def partition(task: GroundTask, disabled: frozenset = frozenset()) -> SubproblemSet:
    if not task.goals:
        raise ValueError("task has no goal conjuncts")
    return SubproblemSet(
        [Subproblem(i, g, reduce_actions(task, [g], disabled)) for i, g in enumerate(task.goals)]
    )


# -- landmarks --------------------------------------------------------------


def landmarks(
    task: GroundTask,
    goal: int,
    state: State | None = None,
    actions: Sequence[GroundAction] | None = None,
) -> list[int]:
    """Facts that every delete-relaxed plan for ``goal`` must make true.

    Candidates are the facts reached before the goal in the relaxed graph
    that are not already true.  A candidate is a landmark when suppressing
    it leaves the goal unreachable.  The chain is ordered by relaxed level
    and ends with the goal.
    """
    state = state or task.init
    actions = list(task.actions if actions is None else actions)
    graph = relaxed_graph(state, actions, [goal])
    if goal not in graph.fact_levels:
        raise Unsolvable(f"{task.fact_label(goal)} is unreachable under delete relaxation")
    if goal in state.facts:
        return [goal]
    found = []
    for f, lv in sorted(graph.fact_levels.items(), key=lambda p: (p[1], p[0])):
        if lv == 0 or f == goal:
            continue
        probe = relaxed_graph(state, actions, [goal], suppressed=frozenset([f]))
        if goal not in probe.fact_levels:
            found.append(f)
    return found + [goal]


# -- fact groups ----------------------------------------------------------


@dataclass
class FactGroup:
    members: tuple  # sorted fact ids
    edges: dict = field(default_factory=dict)  # (f1, f2) -> tuple of action ids

    def predecessors(self, fact: int) -> list[int]:
        return sorted({a for (a, b) in self.edges if b == fact})

    def successors(self, fact: int) -> list[int]:
        return sorted({b for (a, b) in self.edges if a == fact})

    def reachable_from(self, source: int) -> set[int]:
        seen, stack = {source}, [source]
        while stack:
            f = stack.pop()
            for g in self.successors(f):
                if g not in seen:
                    seen.add(g)
                    stack.append(g)
        return seen


def _transition_edges(task: GroundTask, members: frozenset) -> dict:
    edges = defaultdict(list)
    for a in task.actions:
        for f1 in sorted(a.pre & members):
            for f2 in sorted(a.adds & members):
                if f1 != f2:
                    edges[(f1, f2)].append(a.id)
    return {k: tuple(v) for k, v in sorted(edges.items())}


def fact_groups(task: GroundTask) -> list[FactGroup]:
    """Groups "at most one value of the last argument per fixed prefix".

    A candidate is kept when at most one member holds initially and every
    action adding a member also requires and deletes another member.
    """
    candidates = defaultdict(list)
    for fid, atom in enumerate(task.facts):
        if len(atom) >= 2:
            candidates[(atom[0],) + tuple(atom[1:-1])].append(fid)
    groups = []
    for key in sorted(candidates):
        members = frozenset(candidates[key])
        if len(members) < 2 or len(members & task.init.facts) > 1:
            continue
        ok = True
        for a in task.actions:
            added = a.adds & members
            if not added:
                continue
            if len(added) > 1 or not ((a.dels & a.pre & members) - added):
                ok = False
                break
        if ok:
            groups.append(FactGroup(tuple(sorted(members)), _transition_edges(task, members)))
    return groups


def group_of(groups: Iterable[FactGroup], fact: int) -> FactGroup | None:
    return next((g for g in groups if fact in g.members), None)


def path_find(
    task: GroundTask,
    goal: int,
    group: FactGroup,
    init_fact: int,
    actions: Sequence[GroundAction] | None = None,
) -> tuple[list[int], frozenset]:
    """Force a single route into ``goal`` and recompute its landmarks.

    Among the predecessors of ``goal`` that ``init_fact`` can reach, the one
    with the lowest fact id is kept; actions on every other edge into the
    goal are disabled.  Returns the landmark chain and the disabled actions.
    """
    actions = list(task.actions if actions is None else actions)
    reach = group.reachable_from(init_fact)
    if goal not in reach:
        raise NoPath(f"{task.fact_label(goal)} not reachable from {task.fact_label(init_fact)}")
    if goal == init_fact:
        return [goal], frozenset()
    preds = [p for p in group.predecessors(goal) if p in reach]
    keep = preds[0]
    disabled = frozenset(
        aid for p in preds if p != keep for aid in group.edges[(p, goal)]
        if aid not in group.edges[(keep, goal)]
    )
    allowed = [a for a in actions if a.id not in disabled]
    return landmarks(task, goal, task.init, allowed), disabled


def dijkstra(edges: dict, source: int, target: int) -> tuple[list[int], Fraction]:
    """Shortest path over ``{(u, v): weight}``; returns (nodes, cost)."""
    adjacency = defaultdict(list)
    for (u, v), w in sorted(edges.items()):
        if w < 0:
            raise NegativeWeight(f"edge {u}->{v} has weight {w}")
        adjacency[u].append((v, Fraction(w)))
    dist = {source: Fraction(0)}
    prev: dict[int, int] = {}
    heap = [(Fraction(0), source)]
    done = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == target:
            break
        for v, w in adjacency[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    if target not in done:
        raise NoPath(f"no path from {source} to {target}")
    path = [target]
    while path[-1] != source:
        path.append(prev[path[-1]])
    return path[::-1], dist[target]


def edge_weights(task: GroundTask, group: FactGroup, resource: int | None = None) -> dict:
    """Weight of each transition: cheapest duration, or cheapest use of ``resource``."""
    weights = {}
    for edge, aids in group.edges.items():
        costs = []
        for aid in aids:
            a = task.actions[aid]
            if resource is None:
                costs.append(a.duration if task.temporal else Fraction(1))
            else:
                costs.append(sum((-e.delta for e in a.num_eff if e.resource == resource and e.delta < 0), Fraction(0)))
        weights[edge] = min(costs)
    return weights


def path_optimize(
    task: GroundTask,
    goal: int,
    group: FactGroup,
    init_fact: int,
    weights: dict | None = None,
) -> list[int]:
    """Nodes of the cheapest route from ``init_fact`` to ``goal`` (start excluded)."""
    weights = edge_weights(task, group) if weights is None else weights
    nodes, _ = dijkstra(weights, init_fact, goal)
    return nodes[1:] if len(nodes) > 1 else nodes


def wants_path_optimization(task: GroundTask, actions: Sequence[GroundAction]) -> bool:
    """A consumed resource appears in preconditions, or durations differ."""
    if any(c.op == ">=" for a in actions for c in a.num_pre):
        return True
    durations = {a.duration for a in actions if a.durative}
    return len(durations) > 1


# -- producible resources ---------------------------------------------------


@dataclass
class ProducibleSet:
    facts: frozenset
    resources: frozenset
    generators: dict  # ("fact", id) / ("resource", id) -> tuple of action ids


def detect_producible(task: GroundTask) -> ProducibleSet:
    """Least fixpoint: an action whose preconditions are all producible (or
    absent) makes its added facts and increased resources producible.  An
    upper cap ``(<= r c)`` never blocks production and counts as satisfied."""
    facts: set[int] = set()
    resources: set[int] = set()
    generators = defaultdict(list)
    changed = True
    while changed:
        changed = False
        for a in task.actions:
            if not a.pre <= facts:
                continue
            if any(c.op == ">=" and c.resource not in resources for c in a.num_pre):
                continue
            for f in sorted(a.adds):
                if a.id not in generators[("fact", f)]:
                    generators[("fact", f)].append(a.id)
                if f not in facts:
                    facts.add(f)
                    changed = True
            for e in a.num_eff:
                if e.delta > 0:
                    if a.id not in generators[("resource", e.resource)]:
                        generators[("resource", e.resource)].append(a.id)
                    if e.resource not in resources:
                        resources.add(e.resource)
                        changed = True
    return ProducibleSet(
        frozenset(facts), frozenset(resources), {k: tuple(sorted(v)) for k, v in generators.items()}
    )


def consumed_resources(task: GroundTask, producible: ProducibleSet) -> list[int]:
    used = set()
    for a in task.actions:
        for c in a.num_pre:
            if c.op == ">=":
                used.add(c.resource)
        for e in a.num_eff:
            if e.delta < 0:
                used.add(e.resource)
    return sorted(used & producible.resources)


def pure_generators(task: GroundTask, resources: Iterable[int]) -> frozenset:
    """Actions whose only effect is to increase one of ``resources``."""
    resources = set(resources)
    return frozenset(
        a.id for a in task.actions
        if a.num_eff and not a.adds and not a.dels
        and all(e.delta > 0 and e.resource in resources for e in a.num_eff)
    )


def large_bound(task: GroundTask, resource: int, node_limit: int) -> Fraction:
    """Sum of per-action consumption of ``resource`` over consumers, times the node limit."""
    total = Fraction(0)
    for a in task.actions:
        worst = Fraction(0)
        for e in a.num_eff:
            if e.resource == resource and e.delta < 0:
                worst = max(worst, -e.delta)
        for c in a.num_pre:
            if c.resource == resource and c.op == ">=":
                worst = max(worst, c.value)
        total += worst
    return max(total, Fraction(1)) * node_limit


def generator_prefix(task: GroundTask, needs: dict, producible: ProducibleSet, generators: frozenset) -> list[int]:
    """Action ids producing ``needs[resource]`` extra units from the initial state."""
    facts = set(task.init.facts)
    seq: list[int] = []

    def achieve(f: int, depth: int = 0) -> None:
        if f in facts:
            return
        if depth > len(task.facts):
            raise PlanningError(f"cannot produce {task.fact_label(f)}")
        for aid in producible.generators.get(("fact", f), ()):
            a = task.actions[aid]
            for p in sorted(a.pre):
                achieve(p, depth + 1)
            seq.append(aid)
            facts.difference_update(a.dels)
            facts.update(a.adds)
            return
        raise PlanningError(f"no generator for {task.fact_label(f)}")

    for r in sorted(needs):
        need = needs[r]
        if need <= 0:
            continue
        options = [aid for aid in producible.generators.get(("resource", r), ()) if aid in generators]
        options = options or list(producible.generators.get(("resource", r), ()))
        if not options:
            raise PlanningError(f"no generator for {task.resource_label(r)}")
        a = task.actions[options[0]]
        for p in sorted(a.pre):
            achieve(p)
        delta = sum(e.delta for e in a.num_eff if e.resource == r)
        seq.extend([a.id] * math.ceil(need / delta))
    return seq


@dataclass
class ResourceLoopResult:
    result: object  # what plan_fn returned for the final, trimmed amounts
    amounts: dict  # resource -> minimal initial amount
    trace: list  # amounts tried, in order
    prefix: list  # generator actions to prepend


def with_amounts(task: GroundTask, amounts: dict) -> GroundTask:
    values = list(task.init.numerics)
    for r, v in amounts.items():
        values[r] = Fraction(v)
    return task.replace(init=State(task.init.facts, tuple(values)))


def final_amounts(task: GroundTask, sequence: Sequence[int]) -> tuple:
    return apply_sequence(task.init, [task.actions[i] for i in sequence]).numerics


def resource_loop(
    task: GroundTask,
    plan_fn: Callable,
    initial_bound: Fraction | dict | None = None,
    node_limit: int = 3000,
    sequence_of: Callable | None = None,
) -> ResourceLoopResult:
    """Plan with plentiful producible resources, then repeatedly give back the
    unused part of each initial amount and plan again.

    ``plan_fn(task, disabled)`` must return an object whose ``sequence``
    attribute (or ``sequence_of(result)``) lists the executed action ids; it
    raises :class:`PlanningError` when no plan is found.  Pure generator
    actions are disabled inside the loop so that consumption is drawn from
    the initial amounts.
    """
    producible = detect_producible(task)
    resources = consumed_resources(task, producible)
    sequence_of = sequence_of or (lambda res: res.sequence)
    if not resources:
        return ResourceLoopResult(plan_fn(task, frozenset()), {}, [], [])
    generators = pure_generators(task, resources)
    original = {r: task.init.numerics[r] for r in resources}
    if isinstance(initial_bound, dict):
        amounts = {r: Fraction(initial_bound[r]) for r in resources}
    elif initial_bound is not None:
        amounts = {r: Fraction(initial_bound) for r in resources}
    else:
        amounts = {r: max(original[r], large_bound(task, r, node_limit)) for r in resources}
    trace = [dict(amounts)]
    best = None
    while True:
        trial = with_amounts(task, amounts)
        try:
            result = plan_fn(trial, generators)
        except PlanningError:
            if best is None:
                raise
            break
        best = (dict(amounts), result)
        left = final_amounts(trial, sequence_of(result))
        unused = {r: min(max(left[r], Fraction(0)), amounts[r]) for r in resources}
        if all(v == 0 for v in unused.values()):
            break
        amounts = {r: amounts[r] - unused[r] for r in resources}
        trace.append(dict(amounts))
    amounts, result = best
    needs = {r: amounts[r] - original[r] for r in resources}
    prefix = generator_prefix(task, needs, producible, generators)
    return ResourceLoopResult(result, amounts, trace, prefix)

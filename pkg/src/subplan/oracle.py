"""Breadth-first reference planners used as ground truth by the tests."""

from __future__ import annotations

from collections import deque
from typing import Iterable

from .errors import CapExceeded, NumericUnderflow, Unsolvable
from .task import GroundAction, GroundTask, State, applicable, apply

DEFAULT_STATE_CAP = 100_000


def bfs(task: GroundTask, state_cap: int = DEFAULT_STATE_CAP) -> list[int]:
    """A shortest sequential plan, found by exhaustive breadth-first search.

    Raises :class:`Unsolvable` when every reachable state has been seen and
    :class:`CapExceeded` when more than ``state_cap`` states are generated.
    """
    goals = frozenset(task.goals)
    if goals <= task.init.facts:
        return []
    parent: dict[State, tuple] = {task.init: None}
    queue = deque([task.init])
    while queue:
        state = queue.popleft()
        for a in task.actions:
            if not applicable(state, a):
                continue
            try:
                child = apply(state, a)
            except NumericUnderflow:
                continue
            if child in parent:
                continue
            parent[child] = (state, a.id)
            if goals <= child.facts:
                plan = []
                node = child
                while parent[node] is not None:
                    node, aid = parent[node]
                    plan.append(aid)
                return plan[::-1]
            if len(parent) > state_cap:
                raise CapExceeded(f"more than {state_cap} states")
            queue.append(child)
    raise Unsolvable(f"goal unreachable; {len(parent)} states explored")


def relaxed_reachable(init: Iterable[int], actions: Iterable[GroundAction], goals: Iterable[int]) -> bool:
    """Whether ``goals`` can be reached when deletes and numeric conditions are ignored."""
    facts = set(init)
    actions = list(actions)
    changed = True
    while changed:
        changed = False
        for a in actions:
            if a.relaxed_pre <= facts and not a.adds <= facts:
                facts |= a.adds
                changed = True
    return set(goals) <= facts


def relaxed_bfs_length(init: Iterable[int], actions: Iterable[GroundAction], goals: Iterable[int]) -> int | None:
    """Number of relaxed layers needed to reach ``goals`` (None when unreachable)."""
    facts = set(init)
    goals = set(goals)
    actions = list(actions)
    layers = 0
    while not goals <= facts:
        new = set()
        for a in actions:
            if a.relaxed_pre <= facts:
                new |= a.adds
        if new <= facts:
            return None
        facts |= new
        layers += 1
    return layers

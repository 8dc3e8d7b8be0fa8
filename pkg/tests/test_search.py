"""Penalty-biased greedy best-first search for one subgoal."""

from __future__ import annotations

from fractions import Fraction

import pytest

from subplan.errors import SearchTimeout, Unsolvable
from subplan.heuristic import reduce_actions
from subplan.mutex import persistent_mutexes
from subplan.oracle import bfs
from subplan.search import PenaltyContext, SearchConfig, solve_subproblem
from subplan.task import apply_sequence

from conftest import action, chain_task, instances, make_task, suite_task


def test_goal_already_true():
    task = chain_task(2)
    res = solve_subproblem(task, task.init, [0])
    assert res.plan == [] and res.expansions == 0


def test_one_action_gap():
    task = chain_task(1)
    assert solve_subproblem(task, task.init, task.goals).plan == [0]


def test_root_unreachable_is_unsolvable():
    task = chain_task(2)
    with pytest.raises(Unsolvable):
        solve_subproblem(task, task.init, [5])


def test_exhausted_space_is_unsolvable():
    task = suite_task("transport-06")
    with pytest.raises(Unsolvable):
        solve_subproblem(task, task.init, task.goals)


def test_node_limit():
    task = chain_task(6)
    with pytest.raises(SearchTimeout) as info:
        solve_subproblem(task, task.init, task.goals, config=SearchConfig(node_limit=2))
    assert info.value.expansions == 2


def test_ties_broken_by_action_id():
    acts = [action(0, add=[1]), action(1, add=[1])]
    task = make_task(2, acts, goals=[1])
    assert solve_subproblem(task, task.init, task.goals).plan == [0]


def test_penalty_steers_away_from_conflict():
    # two routes to f1; action 1 deletes another subproblem's goal f2
    acts = [action(0, pre=[3], add=[1]), action(1, add=[1], dele=[2]), action(2, add=[3])]
    task = make_task(4, acts, init=[2], goals=[1])
    assert solve_subproblem(task, task.init, [1]).plan == [1]
    ctx = PenaltyContext(persistent_mutexes(task), {1: Fraction(100)}, {1: []}, {1: frozenset([2])})
    biased = solve_subproblem(task, task.init, [1], context=ctx)
    assert biased.plan == [2, 0]
    assert 2 in apply_sequence(task.init, biased.plan, task).facts


@pytest.mark.parametrize("name", sorted(n for n, i in instances().items() if i.solvable))
def test_subgoal_plans_within_twice_optimal(name):
    task = suite_task(name)
    for g in task.goals:
        sub = task.replace(goals=(g,))
        res = solve_subproblem(task, task.init, [g], reduce_actions(task, [g]))
        assert g in apply_sequence(task.init, res.plan, task).facts
        assert len(res.plan) <= 2 * max(1, len(bfs(sub)))


def test_deterministic():
    task = suite_task("courier-02")
    runs = [solve_subproblem(task, task.init, task.goals[:2]) for _ in range(2)]
    assert runs[0].plan == runs[1].plan and runs[0].expansions == runs[1].expansions

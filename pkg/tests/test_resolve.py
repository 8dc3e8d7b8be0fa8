"""Penalty arithmetic, violation counting, starting states and the outer loop."""

from __future__ import annotations

import re
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subplan.errors import BudgetExceeded, Unsolvable
from subplan.mutex import is_active, persistent_mutexes, validate
from subplan.resolve import (
    PenaltyMatrix, PlannerConfig, count_violations, plan, start_states, total_violations, update_penalties,
)
from subplan.task import ScheduledAction, apply_sequence

from conftest import action, chain_task, make_task, suite_task

TELEMETRY = re.compile(r"^iter=(\d+) subgoal=(\d+) h=(\d+|inf) violations=(\d+) gamma_max=([0-9./]+)$")


# -- penalties ----------------------------------------------------------------


def test_zero_violations_leave_penalties():
    p = PenaltyMatrix.initial(3)
    assert update_penalties(p, [[0] * 3] * 3) == p


def test_ipc4_single_update():
    p = PenaltyMatrix.initial(2, "ipc4", Fraction(100), Fraction(1, 10))
    q = update_penalties(p, [[0, 3], [3, 0]])
    assert q[0, 1] == Fraction(1003, 10) and q[0, 0] == 0


def test_new_strategy_two_updates():
    p = PenaltyMatrix.initial(2, "new", Fraction(100), Fraction(1, 10))
    assert p[0, 1] == 0
    p = update_penalties(p, [[0, 5], [5, 0]])
    assert p[0, 1] == Fraction(1, 2)
    p = update_penalties(p, [[0, 2], [2, 0]])
    assert p[0, 1] == Fraction(7, 10)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        update_penalties(PenaltyMatrix.initial(2), [[0]])


@given(
    st.sampled_from(["ipc4", "new"]), st.sampled_from([Fraction(100), Fraction(0)]),
    st.fractions(0, 5, max_denominator=100),
    st.lists(st.lists(st.integers(0, 50), min_size=9, max_size=9), max_size=12),
)
@settings(max_examples=300, deadline=None)
def test_closed_form(strategy, gamma0, xi, ms):
    n = 3
    p = PenaltyMatrix.initial(n, strategy, gamma0, xi)
    start = gamma0 if strategy == "ipc4" else 0
    for step, flat in enumerate(ms, 1):
        m = [flat[i * n:(i + 1) * n] for i in range(n)]
        prev = p
        p = update_penalties(p, m)
        for t in range(n):
            for k in range(n):
                if t == k:
                    continue
                total = sum(row[t * n + k] for row in ms[:step])
                assert p[t, k] == start + xi * total
                assert p[t, k] >= prev[t, k]


# -- violation counting -------------------------------------------------------


def test_one_clashing_pair():
    a = action(0, dele=[0])
    b = action(1, pre=[0])
    table = persistent_mutexes(make_task(1, [a, b], init=[0]))
    m = count_violations([[ScheduledAction.at(a, 0)], [ScheduledAction.at(b, 0)]], table)
    assert m == [[0, 1], [1, 0]] and total_violations(m) == 1


def test_identical_subplans_apart_in_time():
    a = action(0, pre=[0], add=[1], dele=[0])
    table = persistent_mutexes(make_task(2, [a], init=[0]))
    first = [ScheduledAction.at(a, 0)]
    second = [ScheduledAction.at(a, 5)]
    assert count_violations([first, second], table) == [[0, 0], [0, 0]]


@given(st.lists(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), max_size=4), min_size=2, max_size=3))
@settings(max_examples=200, deadline=None)
def test_counts_match_pair_scan(rows):
    acts = [
        action(0, pre=[0], dele=[0], add_end=[1], duration=2, durative=True),
        action(1, pre=[1], del_end=[1], duration=1, durative=True),
        action(2, pre_overall=[0], add=[2], duration=3, durative=True),
        action(3, add=[0], dele=[2], duration=1, durative=True),
    ]
    table = persistent_mutexes(make_task(3, acts))
    subplans = [[ScheduledAction.at(acts[a], s) for a, s in row] for row in rows]
    m = count_violations(subplans, table)
    for t in range(len(rows)):
        for k in range(len(rows)):
            if t == k:
                assert m[t][k] == 0
                continue
            expected = sum(1 for x in subplans[t] for y in subplans[k] if is_active(x, y, table) is not None)
            assert m[t][k] == expected


# -- starting states ----------------------------------------------------------


def test_all_others_empty():
    task = chain_task(2)
    assert start_states(task, [[], []], 0) == [task.init]


def test_six_action_subplan_gives_seven_states():
    task = chain_task(6)
    states = start_states(task, [[], list(range(6))], 0)
    assert len(states) == 7
    assert states[0] == task.init
    assert states[-1] == apply_sequence(task.init, range(6), task)


def test_equal_prefix_states_collapse():
    flip = action(0, pre=[0], add=[1], dele=[0])
    flop = action(1, pre=[1], add=[0], dele=[1])
    task = make_task(2, [flip, flop], init=[0])
    assert len(start_states(task, [[], [0, 1, 0, 1]], 0)) == 2


# -- the outer loop -----------------------------------------------------------


def test_trivially_satisfied_goal():
    task = make_task(1, [action(0, add=[0])], init=[0], goals=[0])
    result = plan(task)
    assert result.schedule.actions == [] and result.iterations == 1


def test_independent_subgoals():
    acts = [action(0, pre=[0], add=[1], dele=[0]), action(1, pre=[2], add=[3], dele=[2])]
    task = make_task(4, acts, init=[0, 2], goals=[1, 3])
    result = plan(task)
    assert sorted(result.sequence) == [0, 1]
    assert result.iterations == 1 and result.history == [0]
    assert result.attribution == [0, 1]


def test_conflict_instance_resolves():
    task = suite_task("transport-02")
    lines = []
    result = plan(task, PlannerConfig(strategy="ipc4", telemetry=lines.append))
    assert validate(task, result.schedule).verdict
    assert result.history[0] > 0 and result.history[-1] == 0
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))
    assert result.evaluations <= 10 * len(task.goals)
    assert len(result.history) == result.iterations
    assert lines == result.telemetry and lines


def test_telemetry_format():
    task = suite_task("courier-02")
    result = plan(task)
    parsed = [TELEMETRY.match(line) for line in result.telemetry]
    assert all(parsed), result.telemetry
    gammas = [Fraction(m.group(5)) for m in parsed]
    assert gammas == sorted(gammas)  # penalties never decrease
    iterations = [int(m.group(1)) for m in parsed]
    assert iterations == sorted(iterations) and iterations[-1] == result.iterations
    assert int(parsed[-1].group(4)) == 0


def test_first_improvement_rule():
    task = suite_task("transport-02")
    result = plan(task, PlannerConfig(acceptance="first"))
    assert validate(task, result.schedule).verdict


def test_new_strategy():
    task = suite_task("transport-02")
    result = plan(task, PlannerConfig(strategy="new"))
    assert validate(task, result.schedule).verdict


def test_quality_mode():
    task = suite_task("timed-02")
    result = plan(task, PlannerConfig(quality=True))
    assert validate(task, result.schedule).verdict


def test_iteration_budget():
    task = suite_task("courier-03")
    with pytest.raises(BudgetExceeded):
        plan(task, PlannerConfig(max_iters=1))


def test_unsolvable():
    with pytest.raises(Unsolvable):
        plan(suite_task("transport-06"))
    with pytest.raises(Unsolvable):
        plan(make_task(2, [action(0, add=[0])], goals=[1]))


def test_config_validation():
    with pytest.raises(ValueError):
        PlannerConfig(strategy="other")
    with pytest.raises(ValueError):
        PlannerConfig(acceptance="worst")
    with pytest.raises(ValueError):
        PlannerConfig(node_limit=0)
    with pytest.raises(ValueError):
        PlannerConfig(xi=-1)


def test_deterministic():
    task = suite_task("dining-03")
    a, b = plan(task), plan(task)
    assert a.schedule.actions == b.schedule.actions and a.telemetry == b.telemetry


def test_attribution_covers_every_step():
    task = suite_task("courier-02")
    result = plan(task)
    assert len(result.attribution) == len(result.schedule.actions)
    assert set(result.attribution) <= set(range(len(task.goals)))


def test_resource_trimming_through_planner():
    task = suite_task("settlers-02")
    result = plan(task)
    assert validate(task, result.schedule).verdict
    assert result.amounts and result.trace[0] != result.trace[-1]
    assert result.prefix_length > 0

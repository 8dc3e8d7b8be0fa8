"""Goal partitioning, landmarks, fact groups, path analyses and producible resources."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subplan.decompose import (
    consumed_resources, detect_producible, dijkstra, edge_weights, fact_groups, generator_prefix, group_of,
    landmarks, large_bound, partition, path_find, path_optimize, pure_generators, resource_loop,
    wants_path_optimization,
)
from subplan.errors import NegativeWeight, NoPath, Unsolvable
from subplan.heuristic import relaxed_graph
from subplan.oracle import bfs
from subplan.pddl import load
from subplan.task import State, apply_sequence

from conftest import action, chain_task, make_task, suite_task

# -- partition ----------------------------------------------------------------


def test_partition_one_per_goal_in_order():
    task = suite_task("courier-02")
    subs = partition(task)
    assert len(subs) == 3
    assert [sp.goal for sp in subs] == list(task.goals)
    assert [sp.index for sp in subs] == [0, 1, 2]


def test_single_goal_partition():
    assert len(partition(chain_task(2))) == 1


def test_empty_goal_rejected():
    with pytest.raises(ValueError):
        partition(make_task(1, [], goals=[]))


def test_relevant_sets_differ_per_package():
    task = suite_task("transport-02")
    a, b = partition(task)
    ids_a, ids_b = {x.id for x in a.actions}, {x.id for x in b.actions}
    assert ids_a != ids_b
    assert all("p2" not in task.actions[i].args for i in ids_a)
    assert all("p1" not in task.actions[i].args for i in ids_b)


# -- landmarks ----------------------------------------------------------------


def test_goal_is_always_a_landmark():
    task = chain_task(3)
    assert landmarks(task, 3)[-1] == 3
    assert landmarks(task, 0) == [0]


def test_chain_landmarks():
    # p -> q -> r
    task = chain_task(2)
    assert landmarks(task, 2) == [1, 2]


def test_two_disjoint_paths():
    acts = [action(0, pre=[0], add=[1]), action(1, pre=[0], add=[2]),
            action(2, pre=[1], add=[3]), action(3, pre=[2], add=[3])]
    task = make_task(4, acts, init=[0], goals=[3])
    assert landmarks(task, 3) == [3]


def test_unreachable_subgoal():
    with pytest.raises(Unsolvable):
        landmarks(chain_task(2), 0, State(frozenset({1})))


@pytest.mark.parametrize("name", ["transport-02", "courier-01", "dining-02", "timed-01"])
def test_landmarks_are_necessary(name):
    task = suite_task(name)
    for g in task.goals:
        chain = landmarks(task, g)
        assert chain[-1] == g
        for f in chain:
            probe = relaxed_graph(task.init, task.actions, [g], suppressed=frozenset([f]))
            assert g not in probe.fact_levels
            if f in task.init.facts:
                continue
            # no real plan avoids the landmark: drop every action adding it
            without = task.replace(actions=tuple(a for a in task.actions if f not in a.adds), goals=(g,))
            with pytest.raises(Unsolvable):
                bfs(without)


# -- fact groups and paths ------------------------------------------------------

AIRPORT = """
(define (domain taxi) (:requirements :strips :typing) (:types plane spot)
  (:predicates (at ?a - plane ?s - spot) (link ?x - spot ?y - spot))
  (:action move :parameters (?a - plane ?x - spot ?y - spot)
    :precondition (and (at ?a ?x) (link ?x ?y))
    :effect (and (at ?a ?y) (not (at ?a ?x)))))
"""

AIRPORT_PROBLEM = """
(define (problem two-routes) (:domain taxi)
  (:objects a1 - plane sg1 sg2 sg3 sg4 sg5 sg6 sg7 sg8 - spot)
  (:init (at a1 sg1)
    (link sg1 sg2) (link sg2 sg3) (link sg3 sg4) (link sg4 sg8)
    (link sg1 sg5) (link sg5 sg6) (link sg6 sg7) (link sg7 sg8)
    (link sg2 sg1) (link sg3 sg2) (link sg4 sg3) (link sg8 sg4)
    (link sg5 sg1) (link sg6 sg5) (link sg7 sg6) (link sg8 sg7))
  (:goal (and (at a1 sg8))))
"""


def airport():
    return load(AIRPORT, AIRPORT_PROBLEM)


def at(task, spot):
    return task.fact_index[("at", "a1", spot)]


def test_location_group_of_eight():
    task = airport()
    groups = fact_groups(task)
    assert len(groups) == 1
    assert len(groups[0].members) == 8
    assert group_of(groups, at(task, "sg3")) is groups[0]


def test_add_without_sibling_delete_is_no_group():
    acts = [action(0, add=[1])]
    task = make_task(2, acts, init=[0])
    task = task.replace(facts=(("at", "a", "x"), ("at", "a", "y")), fact_index={})
    assert fact_groups(task) == []


def test_transport_groups_hand_enumeration():
    task = suite_task("transport-02")
    groups = fact_groups(task)
    assert [[task.facts[f] for f in g.members] for g in groups] == [
        [("at", "t1", "l1"), ("at", "t1", "l2"), ("at", "t1", "l3")]
    ]


def test_no_landmarks_between_two_routes():
    task = airport()
    assert landmarks(task, at(task, "sg8")) == [at(task, "sg8")]


def test_path_find_forces_lowest_predecessor():
    task = airport()
    (group,) = fact_groups(task)
    chain, disabled = path_find(task, at(task, "sg8"), group, at(task, "sg1"))
    assert chain == [at(task, s) for s in ("sg2", "sg3", "sg4", "sg8")]
    assert {task.actions[a].args for a in disabled} == {("a1", "sg7", "sg8")}
    again = path_find(task, at(task, "sg8"), group, at(task, "sg1"))
    assert again == (chain, disabled)


def test_path_find_single_path():
    task = chain_task(3)
    task = task.replace(facts=tuple(("at", "a", f"s{i}") for i in range(4)), fact_index={})
    (group,) = fact_groups(task)
    chain, disabled = path_find(task, 3, group, 0)
    assert chain == [1, 2, 3] and not disabled


def test_path_find_disconnected():
    task = airport()
    (group,) = fact_groups(task)
    one_way = task.replace(actions=tuple(a for a in task.actions if a.args[2] != "sg8"))
    (g2,) = fact_groups(one_way)
    with pytest.raises(NoPath):
        path_find(one_way, at(task, "sg8"), g2, at(task, "sg1"))
    assert group.members == g2.members


def test_dijkstra_uniform_weights_min_hops():
    edges = {(0, 1): 1, (1, 2): 1, (2, 3): 1, (0, 3): 1}
    assert dijkstra(edges, 0, 3) == ([0, 3], 1)


def test_dijkstra_diamond():
    edges = {(0, 1): 1, (1, 3): 1, (0, 2): 0, (2, 3): 3}
    assert dijkstra(edges, 0, 3) == ([0, 1, 3], 2)


def test_dijkstra_errors():
    with pytest.raises(NegativeWeight):
        dijkstra({(0, 1): -1}, 0, 1)
    with pytest.raises(NoPath):
        dijkstra({(0, 1): 1}, 1, 0)


def brute_shortest(edges: dict, source: int, target: int):
    nodes = sorted({u for u, _ in edges} | {v for _, v in edges})
    best = None
    others = [n for n in nodes if n not in (source, target)]
    for r in range(len(others) + 1):
        for middle in itertools.permutations(others, r):
            path = [source, *middle, target]
            if all((u, v) in edges for u, v in zip(path, path[1:])):
                cost = sum(edges[(u, v)] for u, v in zip(path, path[1:]))
                best = cost if best is None else min(best, cost)
    return best


@given(st.dictionaries(
    st.tuples(st.integers(0, 6), st.integers(0, 6)).filter(lambda e: e[0] != e[1]),
    st.fractions(0, 10, max_denominator=4), max_size=18,
))
@settings(max_examples=150, deadline=None)
def test_dijkstra_matches_path_enumeration(edges):
    expected = brute_shortest(edges, 0, 6) if edges else None
    if expected is None:
        with pytest.raises(NoPath):
            dijkstra(edges, 0, 6)
        return
    path, cost = dijkstra(edges, 0, 6)
    assert cost == expected
    assert sum(edges[(u, v)] for u, v in zip(path, path[1:])) == cost


def test_random_ten_node_graphs():
    rng = random.Random(5)
    for _ in range(20):
        edges = {}
        for u in range(10):
            for v in range(10):
                if u != v and rng.random() < 0.25:
                    edges[(u, v)] = Fraction(rng.randint(0, 9))
        expected = brute_shortest(edges, 0, 9)
        if expected is None:
            with pytest.raises(NoPath):
                dijkstra(edges, 0, 9)
        else:
            assert dijkstra(edges, 0, 9)[1] == expected


def test_path_optimize_by_duration():
    task = suite_task("timed-02")
    groups = fact_groups(task)
    truck_groups = [g for g in groups if task.facts[g.members[0]][0] == "at"]
    assert truck_groups
    g = truck_groups[0]
    start = next(f for f in g.members if f in task.init.facts)
    goal = max(g.reachable_from(start))
    weights = edge_weights(task, g)
    nodes = path_optimize(task, goal, g, start, weights)
    assert nodes[-1] == goal
    expected = brute_shortest(weights, start, goal)
    route = [start] + nodes
    assert sum(weights[(u, v)] for u, v in zip(route, route[1:])) == expected


def test_wants_path_optimization():
    assert wants_path_optimization(suite_task("timed-02"), suite_task("timed-02").actions)
    assert not wants_path_optimization(suite_task("transport-02"), suite_task("transport-02").actions)
    assert wants_path_optimization(suite_task("settlers-01"), suite_task("settlers-01").actions)


# -- producible resources -----------------------------------------------------


def test_producible_rule_a():
    task = make_task(1, [action(0, add=[0])])
    assert detect_producible(task).facts == {0}


def test_producible_rule_b():
    task = make_task(2, [action(0, add=[0]), action(1, pre=[0], add=[1])])
    assert detect_producible(task).facts == {0, 1}


def test_not_producible_behind_missing_fact():
    task = make_task(3, [action(0, pre=[2], add=[1])], init=[2])
    assert detect_producible(task).facts == set()


def test_producible_resource_with_cap():
    gen = action(0, num_pre=[(0, "<=", 12, "start")], num_eff=[(0, 1, "start")])
    use = action(1, add=[0], num_pre=[(0, ">=", 2, "start")], num_eff=[(0, -2, "start")])
    task = make_task(1, [gen, use], goals=[0], numerics=[0])
    prod = detect_producible(task)
    assert prod.resources == {0} and 0 in prod.facts
    assert consumed_resources(task, prod) == [0]
    assert pure_generators(task, [0]) == {0}
    assert large_bound(task, 0, 10) == 20


def test_settlers_resources_detected():
    task = suite_task("settlers-02")
    prod = detect_producible(task)
    names = {task.resources[r][0] for r in consumed_resources(task, prod)}
    assert names == {"timber", "stone"}


@dataclass
class Scripted:
    sequence: list


def lumber_task():
    fell = action(0, num_eff=[(0, 10, "start")], name="fell")
    build = action(1, add=[0], num_pre=[(0, ">=", 100, "start")], num_eff=[(0, -100, "start")], name="build")
    return make_task(1, [fell, build], goals=[0], numerics=[0])


def test_worked_reduction():
    task = lumber_task()
    calls = []

    def plan_fn(trial, disabled):
        amount = trial.init.numerics[0]
        calls.append(amount)
        assert 0 in disabled  # the pure generator is switched off inside the loop
        if amount < 100:
            raise Unsolvable("not enough timber")
        return Scripted([1])

    loop = resource_loop(task, plan_fn, initial_bound=1000)
    assert calls == [1000, 100]
    assert [t[0] for t in loop.trace] == [1000, 100]
    assert loop.amounts == {0: 100}
    assert loop.prefix == [0] * 10
    final = apply_sequence(task.init, [task.actions[a] for a in loop.prefix + loop.result.sequence])
    assert 0 in final.facts and final.numerics[0] == 0


def test_unused_resource_trimmed_to_zero():
    task = lumber_task()
    loop = resource_loop(task, lambda trial, disabled: Scripted([]), initial_bound=1000)
    assert loop.amounts == {0: 0} and loop.prefix == []


def test_failure_at_first_level_propagates():
    task = lumber_task()

    def plan_fn(trial, disabled):
        raise Unsolvable("nothing works")

    with pytest.raises(Unsolvable):
        resource_loop(task, plan_fn, initial_bound=1000)


def test_generator_prefix_achieves_enabling_facts():
    mine = action(0, add=[0], name="open-mine")
    quarry = action(1, pre=[0], num_eff=[(0, 1, "start")], name="quarry")
    task = make_task(1, [mine, quarry], numerics=[0])
    prod = detect_producible(task)
    assert generator_prefix(task, {0: 3}, prod, frozenset()) == [0, 1, 1, 1]

"""Shared builders for synthetic ground tasks and access to the bundled suite."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import pytest

from subplan.bench import bundled_suite, load_manifest
from subplan.errors import NumericUnderflow
from subplan.pddl import load_files
from subplan.task import GroundAction, GroundTask, NumericCondition, NumericEffect, State, applicable, apply

SUITE = bundled_suite()


def action(
    aid: int,
    pre=(),
    add=(),
    dele=(),
    *,
    name: str | None = None,
    duration=1,
    durative: bool = False,
    num_pre=(),
    num_eff=(),
    **timed,
) -> GroundAction:
    """A ground action over integer fact ids.

    ``pre``/``add``/``dele`` fill the start buckets; ``timed`` may set any
    of ``pre_overall``, ``pre_end``, ``add_end``, ``del_end`` directly.
    """
    fields = {k: frozenset(v) for k, v in timed.items()}
    return GroundAction(
        id=aid,
        name=name or f"a{aid}",
        pre_start=frozenset(pre),
        add_start=frozenset(add),
        del_start=frozenset(dele),
        duration=Fraction(duration),
        durative=durative,
        num_pre=tuple(NumericCondition(r, op, Fraction(v), t) for r, op, v, t in num_pre),
        num_eff=tuple(NumericEffect(r, Fraction(d), t) for r, d, t in num_eff),
        **fields,
    )


def make_task(
    n_facts: int,
    actions,
    init=(),
    goals=(),
    numerics=(),
    bounds=(),
    name: str = "synthetic",
) -> GroundTask:
    facts = tuple((f"f{i}",) for i in range(n_facts))
    resources = tuple((f"r{i}",) for i in range(len(numerics)))
    return GroundTask(
        facts=facts,
        actions=tuple(actions),
        init=State(frozenset(init), tuple(Fraction(v) for v in numerics)),
        goals=tuple(goals),
        resources=resources,
        resource_bounds=tuple(bounds) if bounds else (),
        name=name,
    )


def chain_task(length: int) -> GroundTask:
    """f0 -> f1 -> ... -> f<length>, each step deleting its precondition."""
    acts = [action(i, pre=[i], add=[i + 1], dele=[i]) for i in range(length)]
    return make_task(length + 1, acts, init=[0], goals=[length])


@lru_cache(maxsize=None)
def instances() -> dict:
    return {inst.name: inst for inst in load_manifest(SUITE)}


@lru_cache(maxsize=None)
def suite_task(name: str, prune: bool = True) -> GroundTask:
    inst = instances()[name]
    return load_files(inst.domain, inst.problem, prune=prune)


@pytest.fixture
def transport_task() -> GroundTask:
    return suite_task("transport-01")


def random_walk(task: GroundTask, rng, length: int) -> list[int]:
    """An executable sequential plan of at most ``length`` steps, chosen at random."""
    state, steps = task.init, []
    for _ in range(length):
        options = []
        for a in task.actions:
            if not applicable(state, a):
                continue
            try:
                nxt = apply(state, a)
            except NumericUnderflow:
                continue
            if task.resource_bounds and any(
                b is not None and v > b for v, b in zip(nxt.numerics, task.resource_bounds)
            ):
                continue
            options.append((a.id, nxt))
        if not options:
            break
        aid, state = options[rng.randrange(len(options))]
        steps.append(aid)
    return steps


# criterion number -> "PASS ..." / "FAIL ..." line, filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

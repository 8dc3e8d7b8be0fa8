"""Greedy earliest-start scheduling of a sequential plan (an enhanced PERT pass).

Each step is placed, in plan order and without backtracking, at the
earliest time that follows its causal supporters and the clashing steps
before it, and at which no mutex becomes active and no resource leaves its
bounds.  Steps coming from different subplans only constrain each other
through resources; their mutex conflicts are reported, not repaired.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import NumericInfeasible
from .mutex import MutexTable, active_conflicts, is_active, persistent_mutexes
from .task import END, OVERALL, START, GroundTask, ScheduledAction

INSTANT_GAP = Fraction(1)  # separation of dependent zero-length steps in non-temporal tasks
TEMPORAL_GAP = Fraction(1, 1000)  # separation of dependent steps in temporal tasks


def gap_for(task: GroundTask) -> Fraction:
    return TEMPORAL_GAP if task.temporal else INSTANT_GAP


@dataclass
class TemporalSchedule:
    actions: list = field(default_factory=list)  # ScheduledAction, in plan order
    residual_conflicts: list = field(default_factory=list)
    resource_violations: list = field(default_factory=list)  # (step index, resource, time, value)

    @property
    def makespan(self) -> Fraction:
        return max((s.end for s in self.actions), default=Fraction(0))

    def sorted_actions(self) -> list:
        return sorted(self.actions, key=lambda s: (s.start, s.action, s.end))


def _resource_violations(task: GroundTask, placed: Sequence[ScheduledAction]) -> list:
    """Resource bound and numeric-condition failures along the timeline.

    Uses the same phase order as the validator: at each instant, ends of
    running steps, then starts (conditions checked before any start effect),
    then the end half of zero-length steps.
    """
    if not task.resources:
        return []
    acts = task.actions
    items = [(i, s) for i, s in enumerate(placed) if acts[s.action].num_eff or acts[s.action].num_pre]
    values = list(task.init.numerics)
    bounds = task.resource_bounds
    out = []

    def check(members, timings, t):
        for i, s in members:
            for c in acts[s.action].num_pre:
                if c.timing in timings and not c.holds(values[c.resource]):
                    out.append((i, c.resource, t, values[c.resource]))

    def effect(members, timing, t):
        for i, s in members:
            for e in acts[s.action].num_eff:
                if e.timing == timing:
                    values[e.resource] += e.delta
                    v = values[e.resource]
                    if v < 0 or (bounds[e.resource] is not None and v > bounds[e.resource]):
                        out.append((i, e.resource, t, v))

    for t in sorted({s.start for _, s in items} | {s.end for _, s in items}):
        ending = [(i, s) for i, s in items if s.end == t and s.end > s.start]
        check(ending, (END,), t)
        effect(ending, END, t)
        starting = [(i, s) for i, s in items if s.start == t]
        check(starting, (START,), t)
        effect(starting, START, t)
        instant = [(i, s) for i, s in starting if s.end == s.start]
        check(instant, (OVERALL, END), t)
        effect(instant, END, t)
        check([(i, s) for i, s in items if s.start <= t < s.end], (OVERALL,), t)
    return out


def _release(p: ScheduledAction, gap: Fraction) -> Fraction:
    """Earliest start of a step that must follow ``p``."""
    return p.end if p.end > p.start else p.end + gap


def schedule(
    plan: Iterable[int],
    task: GroundTask,
    sources: Sequence[frozenset] | None = None,
    table: MutexTable | None = None,
    strict: bool = True,
) -> TemporalSchedule:
    """Place each step of ``plan`` as early as its dependencies allow.

    ``sources[i]`` names the subplans step i belongs to; two steps constrain
    each other only when those sets intersect.  With ``strict`` a step that
    cannot be placed without breaking a resource bound raises
    :class:`NumericInfeasible`; otherwise it is placed at the horizon and the
    violation recorded.
    """
    steps = list(plan)
    if sources is None:
        sources = [frozenset([0])] * len(steps)
    table = table or persistent_mutexes(task)
    gap = gap_for(task)
    acts = task.actions
    placed: list[ScheduledAction] = []
    check_numeric = bool(task.resources)
    base_violations = 0

    for i, aid in enumerate(steps):
        a = acts[aid]
        related = [j for j in range(i) if sources[j] & sources[i]]
        earliest = Fraction(0)
        needed = a.pre_start | a.pre_overall | a.pre_end
        for f in needed:
            for j in reversed(related):
                if f in acts[steps[j]].adds:
                    earliest = max(earliest, _release(placed[j], gap))
                    break
        clashing = [j for j in related if (steps[j], aid) in table]
        for j in clashing:
            p = placed[j]
            earliest = max(earliest, _release(p, gap))

        numeric = check_numeric and bool(a.num_eff or a.num_pre)
        times = {p.end for p in placed} | {p.start for p in placed}
        boundaries = sorted(times | {t + gap for t in times})
        candidate = earliest
        while True:
            trial = ScheduledAction(candidate, aid, candidate + a.duration)
            if any(is_active(placed[j], trial, table) is not None for j in clashing):
                candidate += gap
                continue
            if not numeric or len(_resource_violations(task, placed + [trial])) <= base_violations:
                break
            later = [b for b in boundaries if b > candidate]
            if later:
                candidate = later[0]
                continue
            if strict:
                raise NumericInfeasible(f"no feasible start for step {i} {a.label}")
            break
        placed.append(trial)
        if numeric:
            base_violations = len(_resource_violations(task, placed))

    result = TemporalSchedule(placed)
    result.residual_conflicts = active_conflicts(sorted(placed), table)
    result.resource_violations = _resource_violations(task, placed) if check_numeric else []
    return result


def estimate_makespan(
    relaxed_plan: Sequence[int],
    scheduled_subplans: Sequence[Sequence[int]],
    task: GroundTask,
    table: MutexTable | None = None,
) -> Fraction:
    """Makespan of the other subplans followed by a relaxed plan, conflicts ignored."""
    steps: list[int] = []
    sources: list[frozenset] = []
    for k, sub in enumerate(scheduled_subplans):
        steps.extend(sub)
        sources.extend([frozenset([k])] * len(sub))
    steps.extend(relaxed_plan)
    sources.extend([frozenset([-1])] * len(relaxed_plan))
    return schedule(steps, task, sources, table, strict=False).makespan

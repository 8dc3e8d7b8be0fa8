"""Persistent mutexes, activation of mutexes under a schedule, plan validation
and constraint-locality statistics."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .errors import PartitionError
from .task import END, OVERALL, START, GroundAction, GroundTask, ScheduledAction, State, format_decimal

INCONSISTENT = "inconsistent-effects"
INTERFERENCE = "interference"


@dataclass(frozen=True)
class MutexWitness:
    """``action`` deletes ``fact`` at ``del_tag``; ``other`` adds or needs it at ``other_tag``."""

    cause: str
    fact: int
    deleter: int
    del_tag: str
    other: int
    other_tag: str


@dataclass
class MutexTable:
    actions: Sequence[GroundAction]
    entries: dict = field(default_factory=dict)  # (a, b) with a < b -> tuple of witnesses
    self_mutex: frozenset = frozenset()

    def __contains__(self, pair) -> bool:
        a, b = pair
        if a == b:
            return a in self.self_mutex
        return (min(a, b), max(a, b)) in self.entries

    def witnesses(self, a: int, b: int) -> tuple:
        return self.entries.get((min(a, b), max(a, b)), ())

    def pairs(self):
        return iter(sorted(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def partners(self, a: int) -> frozenset:
        return self._partners.get(a, frozenset())

    def __post_init__(self):
        table = defaultdict(set)
        for a, b in self.entries:
            table[a].add(b)
            table[b].add(a)
        for a in self.self_mutex:
            table[a].add(a)
        self._partners = {k: frozenset(v) for k, v in table.items()}


def _clash_witnesses(a: GroundAction, b: GroundAction) -> list[MutexWitness]:
    """Every way in which ``a`` deletes something ``b`` adds or needs."""
    out = []
    for dtag, dels in ((START, a.del_start), (END, a.del_end)):
        if not dels:
            continue
        for atag, adds in ((START, b.add_start), (END, b.add_end)):
            for f in sorted(dels & adds):
                out.append(MutexWitness(INCONSISTENT, f, a.id, dtag, b.id, atag))
        for ptag, pre in ((START, b.pre_start), (OVERALL, b.pre_overall), (END, b.pre_end)):
            for f in sorted(dels & pre):
                out.append(MutexWitness(INTERFERENCE, f, a.id, dtag, b.id, ptag))
    return out


def clash(a: GroundAction, b: GroundAction) -> bool:
    """Structural persistent-mutex test (also meaningful when ``a is b``)."""
    return bool(a.dels & (b.adds | b.pre)) or bool(b.dels & (a.adds | a.pre))


def persistent_mutexes(task: GroundTask) -> MutexTable:
    deleters = defaultdict(list)
    touchers = defaultdict(list)
    for a in task.actions:
        for f in a.dels:
            deleters[f].append(a.id)
        for f in a.adds | a.pre:
            touchers[f].append(a.id)
    candidates = set()
    for f, dels in deleters.items():
        for d in dels:
            for o in touchers.get(f, ()):
                if d != o:
                    candidates.add((min(d, o), max(d, o)))
    entries = {}
    acts = task.actions
    for a, b in sorted(candidates):
        entries[(a, b)] = tuple(_clash_witnesses(acts[a], acts[b]) + _clash_witnesses(acts[b], acts[a]))
    selfish = frozenset(a.id for a in acts if a.dels & (a.adds | a.pre))
    return MutexTable(acts, entries, selfish)


@dataclass(frozen=True)
class ActiveWitness:
    condition: str  # "a" .. "d"
    first: ScheduledAction
    second: ScheduledAction
    fact: int
    time: Fraction

    def describe(self, task: GroundTask | None = None) -> str:
        def name(s):
            return task.actions[s.action].label if task else str(s.action)

        fact = task.fact_label(self.fact) if task else str(self.fact)
        return (
            f"({self.condition}) {name(self.first)}@{format_decimal(self.first.start)} "
            f"{name(self.second)}@{format_decimal(self.second.start)} on {fact} "
            f"at {format_decimal(self.time)}"
        )


def _first(*sets) -> int | None:
    best = None
    for s in sets:
        if s:
            m = min(s)
            best = m if best is None else min(best, m)
    return best


def _active_oriented(x: ScheduledAction, a: GroundAction, y: ScheduledAction, b: GroundAction):
    """Conditions in which ``a`` (scheduled as x) is the deleting/ending side."""
    if x.start == y.start:
        f = _first(a.del_start & (b.pre_start | b.add_start))
        if f is not None:
            return "a", f, x.start
    if x.end == y.end:
        f = _first(a.del_end & (b.pre_end | b.add_end))
        if f is not None:
            return "b", f, x.end
    if x.end == y.start:
        f = _first(
            a.del_end & b.add_start, a.del_end & b.pre_start,
            a.add_end & b.del_start, a.pre_end & b.del_start,
        )
        if f is not None:
            return "c", f, x.end
    if b.pre_overall:
        if y.start < x.start < y.end:
            f = _first(a.del_start & b.pre_overall)
            if f is not None:
                return "d", f, x.start
        if y.start < x.end < y.end:
            f = _first(a.del_end & b.pre_overall)
            if f is not None:
                return "d", f, x.end
    return None


def is_active(x: ScheduledAction, y: ScheduledAction, table: MutexTable) -> ActiveWitness | None:
    """Return the first activation condition (a)-(d) met by the pair, if any.

    Both orientations are examined so the answer does not depend on argument
    order; the witness always lists the pair in the order given.
    """
    if (x.action, y.action) not in table:
        return None
    a, b = table.actions[x.action], table.actions[y.action]
    found = []
    for hit in (_active_oriented(x, a, y, b), _active_oriented(y, b, x, a)):
        if hit is not None:
            found.append(hit)
    if not found:
        return None
    cond, fact, time = min(found)
    return ActiveWitness(cond, x, y, fact, time)


# -- validation -------------------------------------------------------------


@dataclass(frozen=True)
class Unsupported:
    index: int  # position in the schedule
    action: int
    condition: object  # fact id, or a text description of a numeric condition
    time: Fraction
    resource: int | None = None


@dataclass
class ValidationReport:
    goal_ok: bool
    conflicts: list = field(default_factory=list)
    unsupported: list = field(default_factory=list)
    resource_errors: list = field(default_factory=list)  # (resource, time, value)
    final_state: object = None

    @property
    def verdict(self) -> bool:
        return self.goal_ok and not self.conflicts and not self.unsupported and not self.resource_errors

    def to_text(self, task: GroundTask) -> str:
        lines = [f"verdict {'valid' if self.verdict else 'invalid'}", f"goal {'ok' if self.goal_ok else 'unmet'}"]
        for w in self.conflicts:
            lines.append("conflict " + w.describe(task))
        for u in self.unsupported:
            cond = task.fact_label(u.condition) if isinstance(u.condition, int) else u.condition
            lines.append(f"unsupported {task.actions[u.action].label} needs {cond} at {format_decimal(u.time)}")
        for r, t, v in self.resource_errors:
            lines.append(f"resource {task.resource_label(r)} = {format_decimal(v)} at {format_decimal(t)}")
        return "\n".join(lines) + "\n"

    def to_structured(self, task: GroundTask) -> str:
        lines = [f"verdict: {str(self.verdict).lower()}", f"goal_ok: {str(self.goal_ok).lower()}"]
        lines.append(f"conflicts: {len(self.conflicts)}")
        for i, w in enumerate(self.conflicts):
            lines.append(f"conflicts[{i}]: {w.describe(task)}")
        lines.append(f"unsupported: {len(self.unsupported)}")
        for i, u in enumerate(self.unsupported):
            cond = task.fact_label(u.condition) if isinstance(u.condition, int) else u.condition
            lines.append(
                f"unsupported[{i}]: {task.actions[u.action].label} {cond} {format_decimal(u.time)}"
            )
        lines.append(f"resource_errors: {len(self.resource_errors)}")
        for i, (r, t, v) in enumerate(self.resource_errors):
            lines.append(f"resource_errors[{i}]: {task.resource_label(r)} {format_decimal(v)} {format_decimal(t)}")
        return "\n".join(lines) + "\n"


def _numeric_text(task: GroundTask, cond) -> str:
    return f"({cond.op} {task.resource_label(cond.resource)} {format_decimal(cond.value)})"


def simulate(task: GroundTask, schedule: Sequence[ScheduledAction], start_state=None):
    """Replay a schedule on the event timeline.

    Returns ``(final_state, unsupported, resource_errors)``.  At each time
    point, ends of running actions are processed before starts; effects of a
    phase are applied together (deletes, then adds).  Zero-length actions
    apply their end phase right after the start phase of the same instant.
    """
    state = start_state or task.init
    facts = set(state.facts)
    values = list(state.numerics)
    bounds = task.resource_bounds
    acts = task.actions
    unsupported: list[Unsupported] = []
    res_errors: list = []
    items = sorted(enumerate(schedule), key=lambda p: (p[1].start, p[1].action, p[0]))
    times = sorted({s.start for s in schedule} | {s.end for s in schedule})

    def check_numeric(idx, sa, timings, t):
        for c in acts[sa.action].num_pre:
            if c.timing in timings and not c.holds(values[c.resource]):
                unsupported.append(Unsupported(idx, sa.action, _numeric_text(task, c), t, c.resource))

    def apply_phase(members, kind, t):
        dels, adds = set(), set()
        for _, sa in members:
            a = acts[sa.action]
            dels |= a.del_start if kind == START else a.del_end
            adds |= a.add_start if kind == START else a.add_end
        facts.difference_update(dels)
        facts.update(adds)
        touched = set()
        for _, sa in members:
            for e in acts[sa.action].num_eff:
                if e.timing == kind:
                    values[e.resource] += e.delta
                    touched.add(e.resource)
        for r in sorted(touched):
            if values[r] < 0 or (bounds[r] is not None and values[r] > bounds[r]):
                res_errors.append((r, t, values[r]))

    for t in times:
        ending = [(i, s) for i, s in items if s.end == t and s.end > s.start]
        for i, s in ending:
            for f in sorted(acts[s.action].pre_end - facts):
                unsupported.append(Unsupported(i, s.action, f, t))
            check_numeric(i, s, (END,), t)
        apply_phase(ending, END, t)
        starting = [(i, s) for i, s in items if s.start == t]
        for i, s in starting:
            for f in sorted(acts[s.action].pre_start - facts):
                unsupported.append(Unsupported(i, s.action, f, t))
            check_numeric(i, s, (START,), t)
        apply_phase(starting, START, t)
        instant = [(i, s) for i, s in starting if s.end == s.start]
        for i, s in instant:
            a = acts[s.action]
            for f in sorted((a.pre_overall | a.pre_end) - facts):
                unsupported.append(Unsupported(i, s.action, f, t))
            check_numeric(i, s, (OVERALL, END), t)
        apply_phase(instant, END, t)
        # state now holds on the open interval up to the next event
        for i, s in items:
            if s.start <= t < s.end:
                for f in sorted(acts[s.action].pre_overall - facts):
                    unsupported.append(Unsupported(i, s.action, f, t))
                check_numeric(i, s, (OVERALL,), t)
    return State(frozenset(facts), tuple(values)), unsupported, res_errors


def active_conflicts(schedule: Sequence[ScheduledAction], table: MutexTable) -> list[ActiveWitness]:
    out = []
    for i in range(len(schedule)):
        partners = table.partners(schedule[i].action)
        if not partners:
            continue
        for j in range(i + 1, len(schedule)):
            if schedule[j].action in partners:
                w = is_active(schedule[i], schedule[j], table)
                if w is not None:
                    out.append(w)
    return out


def validate(task: GroundTask, schedule, table: MutexTable | None = None) -> ValidationReport:
    steps = list(getattr(schedule, "actions", schedule))
    table = table or persistent_mutexes(task)
    final, unsupported, res_errors = simulate(task, steps)
    ordered = sorted(steps)
    conflicts = active_conflicts(ordered, table)
    goal_ok = set(task.goals) <= final.facts
    return ValidationReport(goal_ok, conflicts, unsupported, res_errors, final)


# -- locality ---------------------------------------------------------------


@dataclass(frozen=True)
class LocalityReport:
    n_c: int
    n_g_t: int
    n_g_g: int
    n_ga_g: int
    stages: int

    def _ratio(self, n: int) -> Fraction:
        return Fraction(n, self.n_c) if self.n_c else Fraction(0)

    @property
    def r_g_t(self) -> Fraction:
        return self._ratio(self.n_g_t)

    @property
    def r_g_g(self) -> Fraction:
        return self._ratio(self.n_g_g)

    @property
    def r_ga_g(self) -> Fraction:
        return self._ratio(self.n_ga_g)

    def to_text(self) -> str:
        return (
            f"N_c {self.n_c} N_g_T {self.n_g_t} N_g_G {self.n_g_g} N_ga_G {self.n_ga_g}\n"
            f"r_g_T {float(self.r_g_t):.3f} r_g_G {float(self.r_g_g):.3f} r_ga_G {float(self.r_ga_g):.3f}\n"
        )

    def to_structured(self) -> str:
        rows = [
            ("stages", self.stages), ("N_c", self.n_c), ("N_g_T", self.n_g_t),
            ("N_g_G", self.n_g_g), ("N_ga_G", self.n_ga_g),
            ("r_g_T", self.r_g_t), ("r_g_G", self.r_g_g), ("r_ga_G", self.r_ga_g),
        ]
        return "".join(f"{k}: {v}\n" for k, v in rows)


def stage_of(start: Fraction, horizon: Fraction, stages: int) -> int:
    if horizon <= 0:
        return 0
    return min(stages - 1, int(Fraction(start) * stages // horizon))


def locality(
    task: GroundTask,
    schedule,
    attribution: Sequence[int | None],
    stages: int,
    table: MutexTable | None = None,
    initial: tuple | None = None,
) -> LocalityReport:
    """Count mutex pairs among plan actions and classify them as global by
    time stage and by subgoal.  ``attribution[i]`` is the subgoal of step i.

    Active global pairs are counted in ``initial`` (a schedule and its
    attribution, typically the first merge of independently solved
    subgoals) when given, else in the plan itself.
    """
    steps = list(getattr(schedule, "actions", schedule))
    _check_attribution(task, steps, attribution)
    table = table or persistent_mutexes(task)
    stages = max(1, stages)
    horizon = max((s.end for s in steps), default=Fraction(0))
    horizon = max(horizon, max((s.start for s in steps), default=Fraction(0)))
    n_c = n_t = n_g = n_ga = 0
    for i in range(len(steps)):
        for j in range(i + 1, len(steps)):
            if (steps[i].action, steps[j].action) not in table:
                continue
            n_c += 1
            if stage_of(steps[i].start, horizon, stages) != stage_of(steps[j].start, horizon, stages):
                n_t += 1
            if attribution[i] != attribution[j]:
                n_g += 1
    if initial is None:
        n_ga = _active_global(steps, attribution, table)
    else:
        first = list(getattr(initial[0], "actions", initial[0]))
        _check_attribution(task, first, initial[1])
        n_ga = _active_global(first, initial[1], table)
    return LocalityReport(n_c, n_t, n_g, n_ga, stages)


def _check_attribution(task: GroundTask, steps: Sequence, attribution: Sequence) -> None:
    if len(attribution) != len(steps):
        raise PartitionError(f"{len(steps)} plan actions but {len(attribution)} attributions")
    for i, t in enumerate(attribution):
        if t is None:
            raise PartitionError(f"plan action {i} ({task.actions[steps[i].action].label}) is unattributed")


def _active_global(steps: Sequence, attribution: Sequence, table: MutexTable) -> int:
    count = 0
    for i in range(len(steps)):
        for j in range(i + 1, len(steps)):
            if (attribution[i] != attribution[j] and (steps[i].action, steps[j].action) in table
                    and is_active(steps[i], steps[j], table) is not None):
                count += 1
    return count

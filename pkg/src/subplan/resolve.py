"""The partition-and-resolve loop.

Every goal conjunct is a subproblem.  Each outer iteration re-solves the
subproblems in file order with the penalty-biased search, trying several
starting states taken from prefixes of the other subplans.  The subplans are
then merged, scheduled and validated; violated cross-subproblem constraints
raise the penalties for the next iteration, until the merged plan is valid.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from . import decompose
from .errors import BudgetExceeded, NoPath, SearchTimeout, Unsolvable
from .heuristic import ff_heuristic, relaxed_graph
from .mutex import MutexTable, is_active, persistent_mutexes, validate
from .pert import TemporalSchedule, schedule
from .search import PenaltyContext, SearchConfig, solve_subproblem
from .task import GroundTask, ScheduledAction, State, apply_sequence, format_decimal


@dataclass
class PlannerConfig:
    strategy: str = "ipc4"  # "ipc4" (gamma starts at gamma0) or "new" (gamma starts at 0)
    gamma0: Fraction = Fraction(100)
    xi: Fraction = Fraction(1, 10)
    tau: Fraction = Fraction(1, 10000)
    node_limit: int = 3000
    max_iters: int = 50
    time_budget: float = 1800.0
    quality: bool = False
    penalty_decrease: bool = False
    decrease_period: int = 10
    decrease_factor: Fraction = Fraction(1, 2)
    acceptance: str = "best"  # "best" of all start states, or the "first" improving one
    telemetry: Callable[[str], None] | None = None

    def __post_init__(self):
        if self.strategy not in ("ipc4", "new"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.acceptance not in ("first", "best"):
            raise ValueError(f"unknown acceptance rule {self.acceptance!r}")
        self.gamma0, self.xi, self.tau = Fraction(self.gamma0), Fraction(self.xi), Fraction(self.tau)
        self.decrease_factor = Fraction(self.decrease_factor)
        for name in ("node_limit", "max_iters", "time_budget"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.gamma0 < 0 or self.xi < 0 or self.tau < 0:
            raise ValueError("penalty constants must be nonnegative")


# -- penalties --------------------------------------------------------------


@dataclass(frozen=True)
class PenaltyMatrix:
    gamma: tuple  # N x N tuple of tuples of Fractions
    strategy: str = "ipc4"
    gamma0: Fraction = Fraction(100)
    xi: Fraction = Fraction(1, 10)

    @classmethod
    def initial(cls, n: int, strategy: str = "ipc4", gamma0=Fraction(100), xi=Fraction(1, 10)) -> "PenaltyMatrix":
        start = Fraction(gamma0) if strategy == "ipc4" else Fraction(0)
        gamma = tuple(tuple(Fraction(0) if i == j else start for j in range(n)) for i in range(n))
        return cls(gamma, strategy, Fraction(gamma0), Fraction(xi))

    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        return self.gamma[i][j]

    @property
    def size(self) -> int:
        return len(self.gamma)

    def max(self) -> Fraction:
        return max((v for row in self.gamma for v in row), default=Fraction(0))

    def scaled(self, factor: Fraction) -> "PenaltyMatrix":
        gamma = tuple(tuple(v * factor for v in row) for row in self.gamma)
        return PenaltyMatrix(gamma, self.strategy, self.gamma0, self.xi)


def update_penalties(p: PenaltyMatrix, m: Sequence[Sequence[int]]) -> PenaltyMatrix:
    """gamma[t][k] += xi * m[t][k] for every off-diagonal pair."""
    if len(m) != p.size or any(len(row) != p.size for row in m):
        raise ValueError("violation matrix shape does not match penalties")
    gamma = tuple(
        tuple(p.gamma[i][j] + (p.xi * m[i][j] if i != j else 0) for j in range(p.size))
        for i in range(p.size)
    )
    return PenaltyMatrix(gamma, p.strategy, p.gamma0, p.xi)


def count_violations(subplans: Sequence[Sequence[ScheduledAction]], table: MutexTable) -> list[list[int]]:
    """m[t][k] = number of active mutex pairs between scheduled subplans t and k."""
    n = len(subplans)
    m = [[0] * n for _ in range(n)]
    for t in range(n):
        for k in range(t + 1, n):
            count = 0
            for a in subplans[t]:
                partners = table.partners(a.action)
                for b in subplans[k]:
                    if b.action in partners and is_active(a, b, table) is not None:
                        count += 1
            m[t][k] = m[k][t] = count
    return m


def total_violations(m: Sequence[Sequence[int]]) -> int:
    return sum(m[t][k] for t in range(len(m)) for k in range(t + 1, len(m)))


# -- subplans ---------------------------------------------------------------


@dataclass(frozen=True)
class Occurrence:
    serial: int
    action: int
    origin: int  # subproblem that first planned this step


def start_states(task: GroundTask, subplans: Sequence[Sequence[int]], t: int) -> list[State]:
    """Initial state, then the state after every prefix of every other subplan."""
    return [s for s, _ in _start_candidates(task, [[Occurrence(i, a, k) for i, a in enumerate(sp)]
                                                    for k, sp in enumerate(subplans)], t, cut_own=False)]


def _start_candidates(task: GroundTask, subplans: Sequence[Sequence[Occurrence]], t: int, cut_own: bool = True):
    """(state, shared prefix) pairs to try as starting points for subproblem ``t``.

    The initial state comes first, then the prefixes of each other subplan,
    then the prefixes of all other subplans concatenated in subproblem
    order.  A prefix stops before a step planned by ``t`` itself and before a
    stale copy whose origin no longer contains it.
    """
    owned = {(k, o.serial) for k, sub in enumerate(subplans) for o in sub}

    def usable(sub):
        out = []
        for occ in sub:
            if cut_own and (occ.origin == t or (occ.origin, occ.serial) not in owned):
                break
            out.append(occ)
        return out

    sequences = [usable(sub) for k, sub in enumerate(subplans) if k != t]
    combined, serials = [], set()
    for seq in sequences:
        for occ in seq:
            if occ.serial not in serials:
                serials.add(occ.serial)
                combined.append(occ)
    out = [(task.init, ())]
    seen = {task.init}
    for seq in sequences + [combined]:
        state = task.init
        for j, occ in enumerate(seq):
            state = apply_sequence(state, [task.actions[occ.action]])
            if state not in seen:
                seen.add(state)
                out.append((state, tuple(seq[: j + 1])))
    return out


def _drop_stale(subplans: Sequence[Sequence[Occurrence]], t: int) -> tuple[list, set]:
    """Cut every other subplan before its first copy of a step ``t`` no longer has.

    Returns the new subplan list and the indices of the subplans that were cut.
    """
    kept = {o.serial for o in subplans[t]}
    out, cut = [], set()
    for k, sub in enumerate(subplans):
        if k != t:
            for j, occ in enumerate(sub):
                if occ.origin == t and occ.serial not in kept:
                    sub = sub[:j]
                    cut.add(k)
                    break
        out.append(list(sub))
    return out, cut


@dataclass
class Merged:
    occurrences: list
    sources: list
    attribution: list
    schedule: TemporalSchedule
    report: object
    matrix: list

    @property
    def total(self) -> int:
        return total_violations(self.matrix)


@dataclass
class PlanResult:
    schedule: TemporalSchedule
    sequence: list
    attribution: list
    iterations: int
    history: list
    evaluations: int
    expansions: int
    telemetry: list = field(default_factory=list)
    first_schedule: TemporalSchedule | None = None
    first_attribution: list | None = None
    prefix_length: int = 0
    amounts: dict | None = None  # trimmed initial amounts of producible resources
    trace: list | None = None

    @property
    def makespan(self) -> Fraction:
        return self.schedule.makespan


class Resolver:
    def __init__(self, task: GroundTask, config: PlannerConfig, disabled: frozenset = frozenset()):
        self.task = task
        self.config = config
        self.disabled = disabled
        self.table = persistent_mutexes(task)
        self.subproblems = decompose.partition(task, disabled)
        self.n = len(self.subproblems)
        self.penalties = PenaltyMatrix.initial(self.n, config.strategy, config.gamma0, config.xi)
        self.serials = itertools.count()
        self.subplans: list[list[Occurrence]] = [[] for _ in range(self.n)]
        self.deadline = time.monotonic() + config.time_budget
        self.expansions = 0
        self.evaluations = 0
        self.telemetry: list[str] = []
        self._groups = None
        self._chains: dict[int, list[int]] = {}
        self.dirty: dict[int, int] = {}  # truncated subplan -> subplan whose change cut it

    # -- merging and evaluation --

    def merge(self, subplans: Sequence[Sequence[Occurrence]]) -> Merged:
        order: list[Occurrence] = []
        members: dict[int, set] = {}
        for t, sub in enumerate(subplans):
            for occ in sub:
                if occ.serial not in members:
                    members[occ.serial] = set()
                    order.append(occ)
                members[occ.serial].add(t)
        sources = [frozenset(members[o.serial]) for o in order]
        attribution = [o.origin if o.origin in members[o.serial] else min(members[o.serial]) for o in order]
        sched = schedule([o.action for o in order], self.task, sources, self.table, strict=False)
        report = validate(self.task, sched.actions, self.table)
        matrix = self._violation_matrix(sched.actions, attribution, report)
        return Merged(order, sources, attribution, sched, report, matrix)

    def _violation_matrix(self, placed, attribution, report) -> list[list[int]]:
        n = self.n
        m = [[0] * n for _ in range(n)]
        acts = self.task.actions

        def bump(t, k):
            if t != k:
                m[t][k] += 1
                m[k][t] += 1

        for i in range(len(placed)):
            partners = self.table.partners(placed[i].action)
            for j in range(i + 1, len(placed)):
                if attribution[i] != attribution[j] and placed[j].action in partners:
                    if is_active(placed[i], placed[j], self.table) is not None:
                        bump(attribution[i], attribution[j])
        # a step whose precondition was destroyed by another subplan
        for u in report.unsupported:
            culprit = None
            for j, s in enumerate(placed):
                if s.start > u.time or attribution[j] == attribution[u.index]:
                    continue
                a = acts[s.action]
                hit = (u.condition in a.dels) if isinstance(u.condition, int) else any(
                    e.resource == u.resource and e.delta < 0 for e in a.num_eff
                )
                if hit and (culprit is None or s.start >= placed[culprit].start):
                    culprit = j
            if culprit is not None:
                bump(attribution[u.index], attribution[culprit])
        # a subgoal left false at the end by another subplan
        final = report.final_state.facts
        for t, sp in enumerate(self.subproblems):
            if sp.goal in final:
                continue
            culprit = None
            for j, s in enumerate(placed):
                if sp.goal in acts[s.action].dels and (culprit is None or s.start >= placed[culprit].start):
                    culprit = j
            if culprit is not None:
                bump(t, attribution[culprit])
            elif t in self.dirty:
                bump(t, self.dirty[t])
        return m

    def objective(self, t: int, merged: Merged, own_length: int) -> Fraction:
        value = Fraction(own_length)
        for k in range(self.n):
            if k != t:
                value += self.penalties[t, k] * merged.matrix[t][k]
        if self.config.quality:
            value += self.config.tau * merged.schedule.makespan
        return value

    # -- solving one subproblem --

    def _search(self, start: State, goals, actions, context=None) -> list[int]:
        cfg = SearchConfig(self.config.node_limit, self.config.tau, self.config.quality, self.deadline)
        try:
            res = solve_subproblem(self.task, start, goals, actions, context, cfg)
        except SearchTimeout as exc:
            self.expansions += exc.expansions
            raise
        self.expansions += res.expansions
        return res.plan

    def _fact_groups(self):
        if self._groups is None:
            self._groups = decompose.fact_groups(self.task)
        return self._groups

    def _landmark_chain(self, t: int) -> list[int]:
        """Landmarks for subgoal t, computed once; path finding/optimization when scarce."""
        if t in self._chains:
            return self._chains[t]
        sp = self.subproblems[t]
        chain = decompose.landmarks(self.task, sp.goal, self.task.init, sp.actions)
        if len(chain) <= 2:
            group = decompose.group_of(self._fact_groups(), sp.goal)
            if group is not None:
                inits = sorted(set(group.members) & self.task.init.facts)
                if inits:
                    try:
                        if decompose.wants_path_optimization(self.task, sp.actions):
                            chain = decompose.path_optimize(self.task, sp.goal, group, inits[0])
                        else:
                            chain, _ = decompose.path_find(self.task, sp.goal, group, inits[0], sp.actions)
                    except NoPath:
                        pass
        sp.landmarks = chain
        self._chains[t] = chain
        return chain

    def _solve_with_landmarks(self, t: int, start: State) -> list[int]:
        sp = self.subproblems[t]
        plan: list[int] = []
        state = start
        for fact in self._landmark_chain(t):
            if fact in state.facts:
                continue
            step = self._search(state, [fact], decompose.reduce_actions(self.task, [fact], self.disabled))
            plan += step
            state = apply_sequence(state, [self.task.actions[i] for i in step])
        if sp.goal not in state.facts:
            raise SearchTimeout(0)
        return plan

    def _fresh(self, t: int, plan: Sequence[int]) -> list[Occurrence]:
        return [Occurrence(next(self.serials), a, t) for a in plan]

    def _reuse(self, t: int, prefix: Sequence[Occurrence], plan: Sequence[int]) -> list[Occurrence]:
        """Occurrences for ``plan``, keeping the serials of the current subplan
        where it starts from the same prefix and repeats the same steps."""
        current = self.subplans[t]
        out: list[Occurrence] = []
        if [o.serial for o in current[: len(prefix)]] == [o.serial for o in prefix]:
            for occ, aid in zip(current[len(prefix):], plan):
                if occ.origin != t or occ.action != aid:
                    break
                out.append(occ)
        return out + self._fresh(t, plan[len(out):])

    def _context(self, t: int, prefix: Sequence[Occurrence]) -> PenaltyContext:
        shared = {o.serial for o in prefix}
        others = {
            k: [o.action for o in self.subplans[k] if o.serial not in shared]
            for k in range(self.n) if k != t
        }
        goals = {k: frozenset([self.subproblems[k].goal]) for k in range(self.n) if k != t}
        gamma = {k: self.penalties[t, k] for k in range(self.n) if k != t}
        return PenaltyContext(self.table, gamma, others, goals, [o.action for o in prefix])

    def _emit(self, iteration: int, t: int, h, merged: Merged) -> None:
        total = merged.total
        h_text = "inf" if h == float("inf") else str(h)
        line = (
            f"iter={iteration} subgoal={t} h={h_text} violations={total} "
            f"gamma_max={format_decimal(self.penalties.max())}"
        )
        self.telemetry.append(line)
        if self.config.telemetry:
            self.config.telemetry(line)

    def first_pass(self, t: int) -> None:
        """Solve subgoal t from the initial state.  Exhausting the search space
        there proves the whole task unsolvable, since the actions left out
        by relevance reduction can never help reach the subgoal."""
        sp = self.subproblems[t]
        try:
            plan = self._search(self.task.init, [sp.goal], sp.actions)
        except SearchTimeout:
            try:
                plan = self._solve_with_landmarks(t, self.task.init)
            except (SearchTimeout, Unsolvable):
                plan = []
        self.subplans[t] = self._fresh(t, plan)

    def improve(self, t: int) -> None:
        """Try starting states in order; keep the first strictly better subplan."""
        sp = self.subproblems[t]
        own = [o for o in self.subplans[t] if o.origin == t]
        incumbent = self.objective(t, self.merge(self.subplans), len(own))
        if t in self.dirty:
            # lost steps it had copied from a subplan that changed since
            incumbent = Fraction(10) ** 30
        best = None
        for state, prefix in _start_candidates(self.task, self.subplans, t):
            if time.monotonic() > self.deadline:
                break
            context = self._context(t, prefix)
            try:
                plan = self._search(state, [sp.goal], sp.actions, context)
            except SearchTimeout:
                if prefix:
                    continue
                try:
                    plan = self._solve_with_landmarks(t, state)
                except (SearchTimeout, Unsolvable):
                    continue
            except Unsolvable:
                continue
            candidate = list(prefix) + self._reuse(t, prefix, plan)
            trial = list(self.subplans)
            trial[t] = candidate
            trial, cut = _drop_stale(trial, t)
            value = self.objective(t, self.merge(trial), len(plan))
            value += sum((self.penalties[t, k] for k in cut), Fraction(0))
            if value < incumbent:
                best = (trial, cut)
                if self.config.acceptance == "first":
                    break
                incumbent = value
        if best is not None:
            self.subplans, cut = best
            self.dirty.pop(t, None)
            self.dirty.update({k: t for k in cut})

    def run(self) -> PlanResult:
        history: list[int] = []
        first = None
        for iteration in range(1, self.config.max_iters + 1):
            for t in range(self.n):
                if time.monotonic() > self.deadline:
                    raise BudgetExceeded("time budget exhausted", self._diagnostics(history))
                self.evaluations += 1
                if iteration == 1:
                    self.first_pass(t)
                else:
                    self.improve(t)
                h = ff_heuristic(self.task.init, self.subproblems[t].actions, [self.subproblems[t].goal]).h
                self._emit(iteration, t, h, self.merge(self.subplans))
            merged = self.merge(self.subplans)
            history.append(merged.total)
            if first is None:
                first = merged
            if merged.report.verdict:
                return PlanResult(
                    merged.schedule, [o.action for o in merged.occurrences], merged.attribution,
                    iteration, history, self.evaluations, self.expansions, self.telemetry,
                    first.schedule, first.attribution,
                )
            self.penalties = update_penalties(self.penalties, merged.matrix)
            if self.config.penalty_decrease and iteration % self.config.decrease_period == 0:
                self.penalties = self.penalties.scaled(self.config.decrease_factor)
        raise BudgetExceeded(f"no valid plan after {self.config.max_iters} iterations", self._diagnostics(history))

    def _diagnostics(self, history):
        merged = self.merge(self.subplans)
        return PlanResult(
            merged.schedule, [o.action for o in merged.occurrences], merged.attribution,
            len(history), history, self.evaluations, self.expansions, self.telemetry,
        )


def check_reachable(task: GroundTask, disabled: frozenset = frozenset()) -> None:
    actions = [a for a in task.actions if a.id not in disabled]
    graph = relaxed_graph(task.init, actions, task.goals)
    missing = [g for g in task.goals if g not in graph.fact_levels]
    if missing:
        raise Unsolvable("unreachable goal " + ", ".join(task.fact_label(g) for g in missing))


def resolve(task: GroundTask, config: PlannerConfig | None = None, disabled: frozenset = frozenset()) -> PlanResult:
    """Partition-and-resolve without the producible-resource treatment."""
    config = config or PlannerConfig()
    check_reachable(task, disabled)
    if all(g in task.init.facts for g in task.goals):
        empty = TemporalSchedule([])
        return PlanResult(empty, [], [], 1, [0], 0, 0, [], empty, [])
    return Resolver(task, config, disabled).run()


def plan(task: GroundTask, config: PlannerConfig | None = None) -> PlanResult:
    """Full planner: resource trimming around partition-and-resolve when the
    task has producible resources that are consumed."""
    config = config or PlannerConfig()
    producible = decompose.detect_producible(task)
    if not decompose.consumed_resources(task, producible):
        return resolve(task, config)
    check_reachable(task)
    started = time.monotonic()

    def plan_fn(trial: GroundTask, disabled: frozenset) -> PlanResult:
        remaining = config.time_budget - (time.monotonic() - started)
        if remaining <= 0:
            raise BudgetExceeded("time budget exhausted")
        sub = PlannerConfig(**{**config.__dict__, "time_budget": remaining})
        return resolve(trial, sub, disabled)

    loop = decompose.resource_loop(task, plan_fn, node_limit=config.node_limit)
    inner: PlanResult = loop.result
    sequence = list(loop.prefix) + list(inner.sequence)
    table = persistent_mutexes(task)
    sched = schedule(sequence, task, None, table, strict=False)
    report = validate(task, sched.actions, table)
    if not report.verdict:
        raise BudgetExceeded("assembled plan with generated resources does not validate", inner)
    # generator steps are credited to the first subgoal
    attribution = [0] * len(loop.prefix) + list(inner.attribution)
    result = PlanResult(
        sched, sequence, attribution, inner.iterations, inner.history, inner.evaluations,
        inner.expansions, inner.telemetry, inner.first_schedule, inner.first_attribution,
        prefix_length=len(loop.prefix), amounts=loop.amounts, trace=loop.trace,
    )
    return result

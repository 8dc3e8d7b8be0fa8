"""Acceptance criteria 1-10.  Each test records one PASS/FAIL line, printed in
the terminal summary, and then asserts the criterion."""

from __future__ import annotations

import random
import re
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subplan.bench import bundle_sweep
from subplan.cli import main
from subplan.decompose import pure_generators, resource_loop, with_amounts
from subplan.errors import BudgetExceeded, CapExceeded, PlanningError, Unsolvable
from subplan.mutex import locality, persistent_mutexes
from subplan.oracle import bfs
from subplan.pert import schedule
from subplan.resolve import PenaltyMatrix, PlannerConfig, plan, resolve, update_penalties

from conftest import ACCEPTANCE, action, instances, make_task, random_walk, suite_task
from test_decompose import Scripted, lumber_task
from test_heuristic import check_heuristic_contracts, delete_free_tasks

NAMES = sorted(instances())
SOLVABLE = [n for n in NAMES if instances()[n].solvable]


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


def paths(name: str) -> list[str]:
    inst = instances()[name]
    return [str(inst.domain), str(inst.problem)]


def test_criterion_1_soundness(tmp_path, capsys):
    started = time.monotonic()
    failures = []
    for name in SOLVABLE:
        out = tmp_path / f"{name}.plan"
        code = main(["plan", *paths(name), "-o", str(out)])
        if code != 0:
            failures.append(f"{name}: plan exit {code}")
            continue
        code = main(["validate", *paths(name), str(out)])
        if code != 0:
            failures.append(f"{name}: validate exit {code}")
    # the one unsolvable instance must be reported as such, not planned
    unsolvable = [n for n in NAMES if instances()[n].solvable is False]
    for name in unsolvable:
        code = main(["plan", *paths(name), "-o", str(tmp_path / f"{name}.plan")])
        if code != 3:
            failures.append(f"{name}: expected exit 3, got {code}")
    elapsed = time.monotonic() - started
    capsys.readouterr()
    ok = not failures and len(SOLVABLE) >= 20 and elapsed < 120
    record(1, ok, f"{len(SOLVABLE)} instances planned and validated in {elapsed:.1f}s; failures={failures}")


def test_criterion_2_oracle_equivalence():
    discrepancies, compared = [], 0
    for name in NAMES:
        task = suite_task(name)
        try:
            oracle = bfs(task, 10**5) is not None
        except Unsolvable:
            oracle = False
        except CapExceeded:
            continue
        try:
            plan(task)
            planned = True
        except PlanningError:
            planned = False
        compared += 1
        if planned != oracle:
            discrepancies.append(name)
    record(2, compared >= 20 and not discrepancies, f"{compared} instances compared; discrepancies={discrepancies}")


def test_criterion_3_bundle_scaling():
    sweep = bundle_sweep(suite_task("courier-03"))
    sizes = [s for s, _ in sweep]
    counts = [n for _, n in sweep]
    ok = (
        sizes == [5, 4, 3, 2, 1] and None not in counts
        and all(b < a for a, b in zip(counts, counts[1:]))
        and counts[-1] * 4 <= counts[0]
    )
    record(3, ok, f"expansions for bundle sizes 5..1: {counts}")


def test_criterion_4_conflict_resolution():
    task = suite_task("transport-02")
    result = plan(task, PlannerConfig(strategy="ipc4"))
    per_iter: dict = {}
    for line in result.telemetry:
        m = re.match(r"iter=(\d+) .* violations=(\d+) ", line)
        per_iter[int(m.group(1))] = int(m.group(2))
    logged = [per_iter[i] for i in sorted(per_iter)]
    n = len(task.goals)
    ok = (
        n == 2 and logged == result.history
        and all(b <= a for a, b in zip(logged, logged[1:]))
        and logged[-1] == 0 and result.evaluations <= 10 * n
    )
    record(4, ok, f"violations per iteration {logged}, {result.evaluations} evaluations for N={n}")


def test_criterion_5_locality():
    reports = {}
    for name in SOLVABLE:
        task = suite_task(name)
        if len(task.goals) < 2:
            continue
        result = plan(task)
        acts = result.schedule.actions
        order = sorted(range(len(acts)), key=lambda k: (acts[k].start, acts[k].action, acts[k].end))
        reports[name] = locality(
            task, [acts[k] for k in order], [result.attribution[k] for k in order], len(task.goals),
            initial=(result.first_schedule.actions, result.first_attribution),
        )
    ratios = [r for rep in reports.values() for r in (rep.r_g_t, rep.r_g_g, rep.r_ga_g)]
    in_range = all(isinstance(r, Fraction) and 0 <= r <= 1 for r in ratios)
    ordered = [n for n, rep in reports.items() if rep.r_ga_g > rep.r_g_g]
    mean_t = sum(rep.r_g_t for rep in reports.values()) / len(reports)
    mean_g = sum(rep.r_g_g for rep in reports.values()) / len(reports)
    ok = in_range and not ordered and mean_g < mean_t
    record(5, ok, f"{len(reports)} instances; mean r_g_T={float(mean_t):.3f} mean r_g_G={float(mean_g):.3f}; "
                  f"r_ga_G > r_g_G on {ordered}")


CLOSED_FORM_FAILURES: list = []


@given(
    st.sampled_from([("ipc4", Fraction(100)), ("new", Fraction(0))]),
    st.fractions(0, 5, max_denominator=1000),
    st.lists(st.lists(st.integers(0, 1000), min_size=16, max_size=16), max_size=20),
)
@settings(max_examples=500, deadline=None)
def test_criterion_6_penalty_closed_form(pair, xi, ms):
    strategy, gamma0 = pair
    n = 4
    p = PenaltyMatrix.initial(n, strategy, Fraction(100), xi)
    for step, flat in enumerate(ms, 1):
        p = update_penalties(p, [flat[i * n:(i + 1) * n] for i in range(n)])
        for t in range(n):
            for k in range(n):
                if t != k:
                    expected = gamma0 + xi * sum(row[t * n + k] for row in ms[:step])
                    if p[t, k] != expected:
                        CLOSED_FORM_FAILURES.append((strategy, step, t, k))
    assert not CLOSED_FORM_FAILURES


def test_criterion_6_report():
    # runs after the property test in file order
    record(6, not CLOSED_FORM_FAILURES, "500 random penalty traces, both strategies, exact rational equality")


def resource_trace_ok(task, scheduled) -> bool:
    """Independent replay of numeric effects in time order, ends before starts."""
    if not task.resources:
        return True
    events = []
    for s in scheduled:
        for e in task.actions[s.action].num_eff:
            at = s.start if e.timing == "start" else s.end
            events.append((at, 0 if e.timing == "end" else 1, e.resource, e.delta))
    values = list(task.init.numerics)
    for _, _, r, delta in sorted(events, key=lambda x: (x[0], x[1])):
        values[r] += delta
        bound = task.resource_bounds[r] if task.resource_bounds else None
        if values[r] < 0 or (bound is not None and values[r] > bound):
            return False
    return True


def test_criterion_7_pert_contracts():
    rng = random.Random(2024)
    tasks = {name: suite_task(name) for name in NAMES}
    tables = {name: persistent_mutexes(task) for name, task in tasks.items()}
    over_sum, residual, traces = [], [], []
    plain = durative = 0
    for i in range(1000):
        name = NAMES[i % len(NAMES)]
        task = tasks[name]
        steps = random_walk(task, rng, rng.randint(1, 12))
        result = schedule(steps, task, table=tables[name], strict=False)
        if task.temporal:
            durative += 1
        else:
            plain += 1
        if result.makespan > sum(task.actions[a].duration for a in steps):
            over_sum.append(name)
        if result.residual_conflicts:
            residual.append(name)
        if result.resource_violations or not resource_trace_ok(task, result.actions):
            traces.append(name)

    independent = []
    for _ in range(200):
        durations = [rng.randint(0, 20) for _ in range(rng.randint(1, 8))]
        acts = [action(i, pre=[2 * i], add=[2 * i + 1], duration=d, durative=True) for i, d in enumerate(durations)]
        task = make_task(2 * len(acts), acts, init=range(0, 2 * len(acts), 2))
        if schedule(range(len(acts)), task).makespan != max(durations):
            independent.append(durations)

    ok = not (over_sum or residual or traces or independent)
    detail = (
        f"{plain} plain + {durative} durative plans; makespan > sum of durations on {len(over_sum)} "
        f"({sorted(set(over_sum))}); residual conflicts {len(residual)}; resource trace violations {len(traces)}; "
        f"independent sets off max duration {len(independent)}/200"
    )
    record(7, ok, detail)


def test_criterion_8_heuristic_contracts():
    failures = []

    @given(delete_free_tasks())
    @settings(max_examples=500, deadline=None)
    def run(task):
        try:
            check_heuristic_contracts(task)
        except AssertionError:
            failures.append(task)
            raise

    try:
        run()
    except AssertionError:
        pass
    record(8, not failures, f"500 random delete-free tasks; failures={len(failures)}")


def test_criterion_9_resource_minimality():
    task = suite_task("settlers-02")
    result = plan(task)
    generators = pure_generators(task, result.amounts)
    loose = []
    for r, amount in sorted(result.amounts.items()):
        if amount == 0:
            continue
        trial = with_amounts(task, {**result.amounts, r: amount - 1})
        try:
            resolve(trial, PlannerConfig(), generators)
            loose.append(task.resource_label(r))
        except (Unsolvable, BudgetExceeded):
            pass

    calls = []

    def scripted(trial, disabled):
        calls.append(trial.init.numerics[0])
        if trial.init.numerics[0] < 100:
            raise Unsolvable("not enough")
        return Scripted([1])

    loop = resource_loop(lumber_task(), scripted, initial_bound=1000)
    mock_ok = calls == [1000, 100] and loop.amounts == {0: 100}
    amounts = {task.resource_label(r): str(v) for r, v in sorted(result.amounts.items())}
    ok = bool(result.amounts) and not loose and mock_ok
    record(9, ok, f"settlers-02 amounts {amounts}, loose after -1: {loose}; mock trace {[str(c) for c in calls]}")


def test_criterion_10_determinism(tmp_path, capsys):
    differ = []
    for name in NAMES:
        outputs = []
        for run in range(2):
            out = tmp_path / f"{name}-{run}.plan"
            code = main(["plan", *paths(name), "-o", str(out)])
            outputs.append((code, out.read_bytes() if out.exists() else None))
        if outputs[0] != outputs[1]:
            differ.append(name)
    capsys.readouterr()
    record(10, not differ, f"{len(NAMES)} instances planned twice; differing outputs={differ}")


@pytest.fixture(autouse=True, scope="module")
def clear_closed_form():
    CLOSED_FORM_FAILURES.clear()
    yield

"""Benchmark harness over a suite directory described by ``manifest.json``.

Each manifest entry names a domain file, a problem file and what is known
about the instance (solvable or not, shortest plan length).  Rows are
produced per instance; the optional bundle-size sweep measures how many
base-planner expansions it takes to reach the first ``s`` goal conjuncts
together, for ``s`` from the full goal count down to 1.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

from .errors import BudgetExceeded, PlanningError, SearchTimeout, Unsolvable
from .heuristic import reduce_actions
from .mutex import validate
from .pddl import load_files
from .resolve import PlannerConfig, plan
from .search import SearchConfig, solve_subproblem
from .task import GroundTask, format_decimal

SWEEP_NODE_LIMIT = 100_000


@dataclass
class Instance:
    name: str
    domain: Path
    problem: Path
    family: str = ""
    solvable: bool | None = None
    bfs_length: int | None = None
    goals: int | None = None
    sweep: bool = False
    conflict: bool = False


@dataclass
class BenchRow:
    name: str
    status: str  # solved | budget | unsolvable | error
    length: int | None = None
    makespan: Fraction | None = None
    iterations: int | None = None
    expansions: int | None = None
    valid: bool | None = None
    seconds: float = 0.0
    message: str = ""
    sweep: list = field(default_factory=list)  # (bundle size, expansions)

    @property
    def solved(self) -> bool:
        return self.status == "solved"


def bundled_suite() -> Path:
    return Path(str(resources.files("subplan") / "suite"))


def load_manifest(suite_dir) -> list[Instance]:
    """Instances listed in ``suite_dir/manifest.json``; an absent manifest means an empty suite."""
    suite_dir = Path(suite_dir)
    path = suite_dir / "manifest.json"
    if not path.exists():
        return []
    data = json.loads(path.read_text())
    out = []
    for row in data.get("instances", []):
        out.append(Instance(
            name=row["name"], domain=suite_dir / row["domain"], problem=suite_dir / row["problem"],
            family=row.get("family", ""), solvable=row.get("solvable"), bfs_length=row.get("bfs_length"),
            goals=row.get("goals"), sweep=bool(row.get("sweep", False)), conflict=bool(row.get("conflict", False)),
        ))
    return out


def bundle_sweep(task: GroundTask, sizes=None, node_limit: int = SWEEP_NODE_LIMIT) -> list[tuple[int, int | None]]:
    """Expansions of one base-planner run reaching the first ``s`` goals together.

    A run that hits the node limit is recorded as ``None``.
    """
    sizes = sizes or range(len(task.goals), 0, -1)
    out = []
    for s in sizes:
        goals = task.goals[:s]
        try:
            res = solve_subproblem(task, task.init, goals, reduce_actions(task, goals), None, SearchConfig(node_limit))
            out.append((s, res.expansions))
        except SearchTimeout:
            out.append((s, None))
    return out


def run_instance(inst: Instance, config: PlannerConfig | None = None, sweep: bool = False) -> BenchRow:
    config = config or PlannerConfig()
    started = time.monotonic()
    row = BenchRow(inst.name, "error")
    try:
        task = load_files(inst.domain, inst.problem)
        if sweep and inst.sweep:
            row.sweep = bundle_sweep(task)
        result = plan(task, config)
        report = validate(task, result.schedule.actions)
        row.status = "solved"
        row.length = len(result.schedule.actions)
        row.makespan = result.makespan
        row.iterations = result.iterations
        row.expansions = result.expansions
        row.valid = report.verdict
    except BudgetExceeded as exc:
        row.status, row.message = "budget", str(exc)
    except Unsolvable as exc:
        row.status, row.message = "unsolvable", str(exc)
    except (PlanningError, OSError) as exc:
        row.status, row.message = "error", f"{type(exc).__name__}: {exc}"
    row.seconds = time.monotonic() - started
    return row


def _run(args) -> BenchRow:
    return run_instance(*args)


def run_suite(suite_dir, config: PlannerConfig | None = None, jobs: int = 1, sweep: bool = False) -> list[BenchRow]:
    """Run every manifest instance, in parallel worker processes when ``jobs > 1``."""
    instances = load_manifest(suite_dir)
    config = config or PlannerConfig()
    work = [(inst, config, sweep) for inst in instances]
    if jobs <= 1 or len(work) <= 1:
        return [_run(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run, work))


def _cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, Fraction):
        return format_decimal(value)
    return str(value)


def format_table(rows: list[BenchRow]) -> str:
    """Fixed-width summary table, one line per instance, then any sweeps."""
    header = ("instance", "status", "length", "makespan", "iters", "expansions", "valid", "seconds")
    body = [
        (r.name, r.status, _cell(r.length), _cell(r.makespan), _cell(r.iterations),
         _cell(r.expansions), _cell(r.valid), f"{r.seconds:.2f}")
        for r in rows
    ]
    widths = [max(len(str(c)) for c in col) for col in zip(header, *body)] if body else [len(h) for h in header]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(line, widths)).rstrip() for line in [header] + body]
    for r in rows:
        if r.sweep:
            cells = " ".join(f"{s}:{_cell(n)}" for s, n in r.sweep)
            lines.append(f"sweep {r.name} bundle:expansions {cells}")
    return "\n".join(lines) + "\n"

"""Command-line entry points: plan, validate, analyze, bfs and bench.

Settings come from command-line flags first, then ``SUBPLAN_*`` environment
variables, then built-in defaults.  Diagnostics go to standard error as
``LEVEL file:line:col message``.

Exit codes for ``plan``: 0 validated plan, 1 input error, 2 budget
exhausted, 3 proven unsolvable.  ``validate`` exits 4 on an invalid plan.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

from . import bench as bench_mod
from .errors import (
    BudgetExceeded, CapExceeded, ParseError, PartitionError, PlanningError, UnsupportedFeature, Unsolvable,
)
from .mutex import locality, validate
from .oracle import DEFAULT_STATE_CAP, bfs
from .pddl import ground, parse_domain, parse_problem
from .planfile import format_attribution, format_plan, parse_attribution, parse_plan
from .resolve import PlannerConfig, plan

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_UNSOLVABLE, EXIT_INVALID = 0, 1, 2, 3, 4
ENV_PREFIX = "SUBPLAN_"


@dataclass
class RunConfig:
    strategy: str = "ipc4"
    gamma0: Fraction = Fraction(100)
    xi: Fraction = Fraction(1, 10)
    tau: Fraction = Fraction(1, 10000)
    node_limit: int = 3000
    max_iters: int = 50
    time_budget: float = 1800.0
    quality: bool = False
    acceptance: str = "best"
    jobs: int = 1
    state_cap: int = DEFAULT_STATE_CAP
    subcommand: str = ""

    def planner_config(self, telemetry=None) -> PlannerConfig:
        return PlannerConfig(
            strategy=self.strategy, gamma0=self.gamma0, xi=self.xi, tau=self.tau,
            node_limit=self.node_limit, max_iters=self.max_iters, time_budget=self.time_budget,
            quality=self.quality, acceptance=self.acceptance, telemetry=telemetry,
        )


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise ValueError(f"must be positive: {text}")
    return value


def _nonnegative_fraction(text: str) -> Fraction:
    value = Fraction(text)
    if value < 0:
        raise ValueError(f"must be nonnegative: {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise ValueError(f"must be positive: {text}")
    return value


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    return parse


PARSERS = {
    "strategy": _choice("ipc4", "new"),
    "gamma0": _nonnegative_fraction,
    "xi": _nonnegative_fraction,
    "tau": _nonnegative_fraction,
    "node_limit": _positive_int,
    "max_iters": _positive_int,
    "time_budget": _positive_float,
    "quality": _bool,
    "acceptance": _choice("best", "first"),
    "jobs": _positive_int,
    "state_cap": _positive_int,
}


def resolve_config(args: argparse.Namespace, environ=None) -> RunConfig:
    """Merge flags over ``SUBPLAN_*`` variables over defaults.  Raises ValueError on bad values."""
    environ = os.environ if environ is None else environ
    config = RunConfig(subcommand=getattr(args, "command", "") or "")
    for f in fields(RunConfig):
        if f.name not in PARSERS:
            continue
        flag = getattr(args, f.name, None)
        env = environ.get(ENV_PREFIX + f.name.upper())
        if flag is not None:
            value = flag if f.name == "quality" else PARSERS[f.name](str(flag))
        elif env is not None:
            try:
                value = PARSERS[f.name](env)
            except ValueError as exc:
                raise ValueError(f"{ENV_PREFIX}{f.name.upper()}: {exc}") from None
        else:
            continue
        setattr(config, f.name, value)
    return config


def diagnostic(level: str, path, message: str, line: int = 0, col: int = 0) -> None:
    print(f"{level} {path}:{line}:{col} {message}", file=sys.stderr)


def _load(domain: str, problem: str, **kwargs):
    """Ground a task, reporting parse and grounding failures against the file at fault."""
    texts = {}
    for path in (domain, problem):
        with open(path) as fh:
            texts[path] = fh.read()
    try:
        dom = parse_domain(texts[domain])
    except (ParseError, UnsupportedFeature) as exc:
        raise _Located(domain, exc) from None
    try:
        prob = parse_problem(texts[problem])
    except (ParseError, UnsupportedFeature) as exc:
        raise _Located(problem, exc) from None
    try:
        return ground(dom, prob, **kwargs)
    except PlanningError as exc:
        raise _Located(problem, exc) from None


class _Located(Exception):
    def __init__(self, path, error):
        super().__init__(str(error))
        self.path = path
        self.error = error

    def report(self) -> None:
        err = self.error
        line, col = getattr(err, "line", 0), getattr(err, "col", 0)
        message = getattr(err, "message", None) or str(err)
        if isinstance(err, UnsupportedFeature):
            message = f"unsupported construct '{err.construct}'"
        diagnostic("ERROR", self.path, message, line, col)


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


# -- subcommands ---------------------------------------------------------------


def cmd_plan(args, config: RunConfig) -> int:
    try:
        task = _load(args.domain, args.problem)
    except _Located as exc:
        exc.report()
        return EXIT_INPUT
    def sink(line: str) -> None:
        print(line, file=sys.stderr, flush=True)

    try:
        result = plan(task, config.planner_config(sink if args.telemetry else None))
    except BudgetExceeded as exc:
        diagnostic("ERROR", args.problem, f"budget exhausted: {exc}")
        return EXIT_BUDGET
    except Unsolvable as exc:
        diagnostic("ERROR", args.problem, f"unsolvable: {exc}")
        return EXIT_UNSOLVABLE
    except PlanningError as exc:
        diagnostic("ERROR", args.problem, f"{type(exc).__name__}: {exc}")
        return EXIT_INPUT
    _write(args.output, format_plan(task, result.schedule.actions))
    if args.attribution:
        order = sorted(range(len(result.schedule.actions)),
                       key=lambda i: (result.schedule.actions[i].start, result.schedule.actions[i].action,
                                      result.schedule.actions[i].end))
        _write(args.attribution, format_attribution([result.attribution[i] for i in order]))
    return EXIT_OK


def _plan_file(path: str, task):
    with open(path) as fh:
        text = fh.read()
    try:
        return parse_plan(text, task)
    except ParseError as exc:
        raise _Located(path, exc) from None


def cmd_validate(args, config: RunConfig) -> int:
    try:
        task = _load(args.domain, args.problem, prune=False)
        steps = _plan_file(args.plan, task)
    except _Located as exc:
        exc.report()
        return EXIT_INPUT
    report = validate(task, steps)
    sys.stdout.write(report.to_structured(task))
    return EXIT_OK if report.verdict else EXIT_INVALID


def _attribution_file(path: str) -> list[int]:
    with open(path) as fh:
        text = fh.read()
    try:
        return parse_attribution(text)
    except ParseError as exc:
        raise _Located(path, exc) from None


def cmd_analyze(args, config: RunConfig) -> int:
    try:
        task = _load(args.domain, args.problem, prune=False)
        steps = sorted(_plan_file(args.plan, task))
        attribution = _attribution_file(args.attribution)
        initial = None
        if args.initial_plan:
            if not args.initial_attribution:
                diagnostic("ERROR", args.initial_plan, "--initial-plan needs --initial-attribution")
                return EXIT_INPUT
            initial = (sorted(_plan_file(args.initial_plan, task)), _attribution_file(args.initial_attribution))
    except _Located as exc:
        exc.report()
        return EXIT_INPUT
    stages = args.stages or max(1, len(task.goals))
    try:
        report = locality(task, steps, attribution, stages, initial=initial)
    except PartitionError as exc:
        diagnostic("ERROR", args.attribution, str(exc))
        return EXIT_INPUT
    sys.stdout.write(report.to_structured())
    return EXIT_OK


def cmd_bfs(args, config: RunConfig) -> int:
    try:
        task = _load(args.domain, args.problem)
    except _Located as exc:
        exc.report()
        return EXIT_INPUT
    try:
        steps = bfs(task, config.state_cap)
    except CapExceeded as exc:
        diagnostic("ERROR", args.problem, f"state cap exceeded: {exc}")
        return EXIT_BUDGET
    except Unsolvable as exc:
        diagnostic("ERROR", args.problem, f"unsolvable: {exc}")
        return EXIT_UNSOLVABLE
    sys.stdout.write("".join(task.actions[a].label + "\n" for a in steps))
    return EXIT_OK


def cmd_bench(args, config: RunConfig) -> int:
    suite = Path(args.suite) if args.suite else bench_mod.bundled_suite()
    rows = bench_mod.run_suite(suite, config.planner_config(), jobs=config.jobs, sweep=args.sweep)
    sys.stdout.write(bench_mod.format_table(rows))
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def _add_planner_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", help="penalty start: ipc4 (gamma0) or new (zero)")
    p.add_argument("--gamma0", help="initial penalty for the ipc4 strategy")
    p.add_argument("--xi", help="penalty increment factor")
    p.add_argument("--tau", help="weight of the makespan estimate in quality mode")
    p.add_argument("--node-limit", dest="node_limit", help="base-planner expansion limit")
    p.add_argument("--max-iters", dest="max_iters", help="outer iteration limit")
    p.add_argument("--time-budget", dest="time_budget", help="wall-clock budget in seconds")
    p.add_argument("--quality", action="store_const", const=True, default=None, help="optimize makespan too")
    p.add_argument("--acceptance", help="start-state rule: best or first")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subplan", description="Subgoal-partitioned PDDL planner.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan and write a plan file")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("-o", "--output", help="plan file (default: standard output)")
    p.add_argument("--attribution", help="also write the subgoal of each plan line")
    p.add_argument("--telemetry", action="store_true", help="print per-evaluation progress on standard error")
    _add_planner_flags(p)
    p.add_argument("--jobs", help=argparse.SUPPRESS)
    p.add_argument("--state-cap", dest="state_cap", help=argparse.SUPPRESS)

    p = sub.add_parser("validate", help="check a plan file")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("plan")

    p = sub.add_parser("analyze", help="constraint locality of a plan")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("plan")
    p.add_argument("attribution")
    p.add_argument("--stages", type=int, help="time stages (default: number of goals)")
    p.add_argument("--initial-plan", dest="initial_plan", help="plan whose active global pairs are counted")
    p.add_argument("--initial-attribution", dest="initial_attribution")

    p = sub.add_parser("bfs", help="shortest plan by breadth-first search")
    p.add_argument("domain")
    p.add_argument("problem")
    p.add_argument("--state-cap", dest="state_cap", help="give up after this many states")

    p = sub.add_parser("bench", help="run a benchmark suite")
    p.add_argument("suite", nargs="?", help="directory with manifest.json (default: bundled suite)")
    p.add_argument("--jobs", help="parallel worker processes")
    p.add_argument("--sweep", action="store_true", help="also run the goal-bundle sweep")
    _add_planner_flags(p)
    return parser


COMMANDS = {"plan": cmd_plan, "validate": cmd_validate, "analyze": cmd_analyze, "bfs": cmd_bfs, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args)
        config.planner_config()
    except ValueError as exc:
        diagnostic("ERROR", "<config>", str(exc))
        return EXIT_INPUT
    try:
        return COMMANDS[args.command](args, config)
    except OSError as exc:
        diagnostic("ERROR", exc.filename or "<input>", exc.strerror or str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

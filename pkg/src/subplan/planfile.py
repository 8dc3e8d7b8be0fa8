"""Reading and writing plan files and subgoal attribution files.

A plan file holds one scheduled action per line,

    <start>: (<name> <args>) [<duration>]

sorted by start time and then by action id, with times written as exact
decimals (``n/d`` when the decimal does not terminate).
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import ParseError
from .task import GroundTask, ScheduledAction, format_decimal

_LINE = re.compile(r"^\s*([0-9./-]+)\s*:\s*\(([^()]*)\)\s*(?:\[\s*([0-9./-]+)\s*\])?\s*$")


def format_plan(task: GroundTask, schedule: Iterable[ScheduledAction]) -> str:
    lines = []
    for s in sorted(schedule, key=lambda s: (s.start, s.action, s.end)):
        a = task.actions[s.action]
        lines.append(f"{format_decimal(s.start)}: {a.label} [{format_decimal(s.duration)}]\n")
    return "".join(lines)


def _number(text: str, line: int, col: int) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad number '{text}'", line, col) from None
    return value


def parse_plan(text: str, task: GroundTask) -> list[ScheduledAction]:
    """Scheduled actions of a plan file; blank lines and ``;`` comments are skipped."""
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        body = raw.split(";", 1)[0]
        if not body.strip():
            continue
        m = _LINE.match(body)
        if not m:
            raise ParseError("expected '<start>: (<action> <args>) [<duration>]'", n, 1)
        start = _number(m.group(1), n, m.start(1) + 1)
        if start < 0:
            raise ParseError("negative start time", n, m.start(1) + 1)
        key = tuple(m.group(2).lower().split())
        if key not in task.action_index:
            raise ParseError(f"unknown action ({' '.join(key)})", n, m.start(2))
        action = task.actions[task.action_index[key]]
        if m.group(3) is not None:
            duration = _number(m.group(3), n, m.start(3) + 1)
            if duration != action.duration:
                raise ParseError(
                    f"duration {m.group(3)} does not match {format_decimal(action.duration)}", n, m.start(3) + 1
                )
        out.append(ScheduledAction.at(action, start))
    return out


def format_attribution(attribution: Sequence[int]) -> str:
    return "".join(f"{k}\n" for k in attribution)


def parse_attribution(text: str) -> list[int]:
    out = []
    for n, raw in enumerate(text.splitlines(), 1):
        body = raw.split(";", 1)[0].strip()
        if not body:
            continue
        try:
            out.append(int(body))
        except ValueError:
            raise ParseError(f"expected a subgoal index, got '{body}'", n, 1) from None
    return out
